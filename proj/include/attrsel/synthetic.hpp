#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "attrsel/embedding_io.hpp"

namespace attrsel {

// Isotropic random unit directions named "rand_<i>". With `orthonormalize`
// the rows are Gram-Schmidt orthonormalized (requires n <= d).
AttributePool gen_random_pool(std::size_t n, std::size_t d, std::uint64_t seed, bool orthonormalize);

// One random base direction plus perturbations of norm ~`spread`, so pairwise
// cosines sit near 1 - O(spread^2). Names are "sim_<i>".
AttributePool gen_similar_pool(std::size_t n, std::size_t d, double spread, std::uint64_t seed);

struct PlantedTaskConfig {
  std::size_t classes = 10;
  std::size_t dim = 32;
  std::size_t planted_attrs = 8;
  std::size_t distractor_attrs = 192;
  std::size_t train_per_class = 50;
  std::size_t test_per_class = 100;
  double noise_sigma = 0.15;
  // Weight of a direction shared by every class prototype and absent from
  // the pool (joint embedding spaces put all images in a common cone).
  double shared_weight = 1.0;
  std::uint64_t seed = 0;
};

struct PlantedTask {
  ImageSet train;
  ImageSet test;
  AttributePool pool;
  // Pool positions of the planted attributes, in planted order.
  std::vector<std::size_t> planted_indices;
  // Per class: pool indices of the planted attributes in its prototype.
  std::vector<std::vector<std::size_t>> class_attributes;
  std::vector<std::vector<double>> class_weights;
};

// Classes are distinct sparse nonnegative combinations of planted directions;
// images are normalize(prototype + N(0, noise_sigma^2 I)). The pool holds the
// planted directions plus random distractors, shuffled. Throws ConfigError.
PlantedTask gen_planted_task(const PlantedTaskConfig& cfg);

}  // namespace attrsel
