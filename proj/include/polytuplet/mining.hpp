#pragma once

#include <cstddef>
#include <vector>

#include "polytuplet/manifold.hpp"
#include "polytuplet/matrix.hpp"

namespace polytuplet {

// With gap = d(a, y) - d(a, j):
//   hard       gap >= 0        (the negative is at least as close as the positive)
//   semi_hard  -m <= gap < 0   (farther than the positive, but inside the margin)
//   easy       gap < -m
// The positive slot of each sample is tagged `positive` and is not counted.
enum class NegativeCategory { hard, semi_hard, easy, positive };

struct MiningCounts {
  std::size_t hard = 0;
  std::size_t semi_hard = 0;
  std::size_t easy = 0;

  std::size_t total() const noexcept { return hard + semi_hard + easy; }
  MiningCounts& operator+=(const MiningCounts& other) noexcept {
    hard += other.hard;
    semi_hard += other.semi_hard;
    easy += other.easy;
    return *this;
  }
  bool operator==(const MiningCounts&) const = default;
};

struct MiningReport {
  MiningCounts counts;
  std::size_t n_answers = 0;
  std::vector<NegativeCategory> mask;  // B x N, row-major

  NegativeCategory at(std::size_t sample, std::size_t answer) const {
    return mask[sample * n_answers + answer];
  }
};

NegativeCategory classify_gap(double gap, double margin) noexcept;

// Classification from a precomputed B x N distance matrix.
MiningReport classify_distances(const Matrix& distances, const std::vector<std::size_t>& labels,
                                double margin);

MiningReport classify_negatives(const EmbeddingBatch& batch, double margin);

// B x N weights: hard -> w_hard, semi-hard -> w_semi, easy -> 1, positive slot -> 0.
Matrix mining_weights(const MiningReport& report, double w_hard, double w_semi);

}  // namespace polytuplet
