#pragma once

#include <span>
#include <vector>

#include "panofuse/parallel.h"

namespace panofuse {

// Patch-token layout of one square view, row-major.
struct TokenGrid {
  int rows = 0;
  int cols = 0;

  int tokens() const { return rows * cols; }
  bool operator==(const TokenGrid&) const = default;
};

// ceil(resolution / patch_size) tokens per side.
TokenGrid TokenGridFor(int resolution, int patch_size);

// Dense T x T token-to-token matrix. Rows are queries, columns keys.
class AttentionTensor {
 public:
  AttentionTensor() = default;
  explicit AttentionTensor(int tokens, double fill = 0.0);
  AttentionTensor(int tokens, std::vector<double> values);

  int tokens() const { return tokens_; }
  double& at(int row, int col) { return values_[Offset(row, col)]; }
  double at(int row, int col) const { return values_[Offset(row, col)]; }
  std::span<double> row(int r);
  std::span<const double> row(int r) const;
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const AttentionTensor&) const = default;

 private:
  size_t Offset(int r, int c) const {
    return static_cast<size_t>(r) * tokens_ + c;
  }

  int tokens_ = 0;
  std::vector<double> values_;
};

// Largest |row sum - 1| over all rows, or +inf if any entry is negative or
// non-finite.
double MaxRowSumDeviation(const AttentionTensor& attn);

// row i = softmax(logits_i + log(key_confidence)). An empty confidence span
// is plain softmax. Logits must be finite; confidences finite and > 0.
AttentionTensor BiasedSoftmax(std::span<const double> logits, int tokens,
                              std::span<const double> key_confidence,
                              const Exec& exec = {});

}  // namespace panofuse
