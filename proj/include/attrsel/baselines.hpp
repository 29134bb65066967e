#pragma once

#include <cstddef>
#include <cstdint>

#include "attrsel/embedding_io.hpp"
#include "attrsel/selection.hpp"

namespace attrsel {

// k distinct indices drawn without replacement, returned in ascending order.
SelectionResult select_uniform(const AttributePool& pool, std::size_t k, std::uint64_t seed);

// k-means++ seeding and Lloyd iterations (Euclidean, on the unit rows) until
// the largest centroid move is below 1e-6 or 100 iterations. Each centroid
// maps to its nearest pool row; collisions fall through to the next-nearest
// unclaimed row.
SelectionResult select_kmeans(const AttributePool& pool, std::size_t k, std::uint64_t seed);

// Top-k right singular vectors of the uncentered pool matrix via power
// iteration with deflation on T^T T; each picks the row with the largest
// |cosine|, deduplicated by next best. Requires k <= min(N, D).
SelectionResult select_svd(const AttributePool& pool, std::size_t k);

// Top-k attributes by mean cosine score over all images; ties to lower index.
SelectionResult select_similarity(const ImageSet& images, const AttributePool& pool, std::size_t k);

}  // namespace attrsel
