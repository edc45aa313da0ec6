#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kinemo/shape.hpp"

namespace kinemo {

/// A procedural category: box-part templates and joint templates whose GT
/// axes coincide with an OBB edge or centroid axis of the movable part by
/// construction (verified at generation time).
struct CategorySpec {
  std::string name;
  int min_mobile = 1, max_mobile = 1;
};

const std::vector<CategorySpec>& builtin_specs();
const CategorySpec* find_spec(const std::string& name);

struct SynthOptions {
  int points_per_leaf = 2000;
  double rot_aug_max_deg = 0.0;  // whole-shape rotation augmentation
};

struct GeneratedShape {
  Shape shape;
  AnnotationSet annotations;
};

/// Deterministic per (category, seed). The shape comes out normalized with
/// annotations in the same frame; throws logic_error if a generated GT axis
/// fails the candidate-coincidence check.
GeneratedShape gen_shape(const CategorySpec& spec, std::uint64_t seed,
                         const SynthOptions& opt = {});

struct Manifest {
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

/// Writes shapes/, annotations/, and manifest.json under out_dir with a
/// per-category 70/10/20 split.
Manifest gen_dataset(const std::vector<CategorySpec>& specs, int n_per_category,
                     std::uint64_t seed, const std::string& out_dir,
                     const SynthOptions& opt = {});

/// Area-weighted uniform sampling of an axis-aligned box surface.
std::vector<Vec3> sample_box_surface(class Rng& rng, const Vec3& lo,
                                     const Vec3& hi, int n);

}  // namespace kinemo
