#include "panofuse/attention.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "panofuse/error.h"

namespace panofuse {

TokenGrid TokenGridFor(int resolution, int patch_size) {
  if (resolution <= 0 || patch_size <= 0) {
    throw InvalidInput("token grid needs positive resolution and patch size");
  }
  const int n = (resolution + patch_size - 1) / patch_size;
  return {n, n};
}

AttentionTensor::AttentionTensor(int tokens, double fill)
    : tokens_(tokens),
      values_(static_cast<size_t>(tokens) * static_cast<size_t>(tokens), fill) {
  if (tokens <= 0) throw InvalidInput("attention needs at least one token");
}

AttentionTensor::AttentionTensor(int tokens, std::vector<double> values)
    : tokens_(tokens), values_(std::move(values)) {
  if (tokens <= 0 ||
      values_.size() != static_cast<size_t>(tokens) * static_cast<size_t>(tokens)) {
    throw InvalidInput("attention values must hold tokens^2 entries");
  }
}

std::span<double> AttentionTensor::row(int r) {
  return std::span<double>(values_).subspan(Offset(r, 0), tokens_);
}

std::span<const double> AttentionTensor::row(int r) const {
  return std::span<const double>(values_).subspan(Offset(r, 0), tokens_);
}

double MaxRowSumDeviation(const AttentionTensor& attn) {
  double worst = 0.0;
  for (int r = 0; r < attn.tokens(); ++r) {
    double sum = 0.0;
    for (double v : attn.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        return std::numeric_limits<double>::infinity();
      }
      sum += v;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

AttentionTensor BiasedSoftmax(std::span<const double> logits, int tokens,
                              std::span<const double> key_confidence,
                              const Exec& exec) {
  if (tokens <= 0 ||
      logits.size() != static_cast<size_t>(tokens) * static_cast<size_t>(tokens)) {
    throw InvalidInput("logits must hold tokens^2 entries");
  }
  if (!key_confidence.empty() &&
      key_confidence.size() != static_cast<size_t>(tokens)) {
    throw InvalidInput("key confidence length " +
                       std::to_string(key_confidence.size()) +
                       " does not match token count " + std::to_string(tokens));
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("attention logits must be finite");
  }
  std::vector<double> bias(tokens, 0.0);
  for (size_t j = 0; j < key_confidence.size(); ++j) {
    const double c = key_confidence[j];
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw InvalidInput("key confidence must be finite and positive");
    }
    bias[j] = std::log(c);
  }

  AttentionTensor out(tokens);
  ParallelFor(tokens, exec, [&](int i) {
    const auto in = logits.subspan(static_cast<size_t>(i) * tokens, tokens);
    auto dst = out.row(i);
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < tokens; ++j) {
      dst[j] = in[j] + bias[j];
      peak = std::max(peak, dst[j]);
    }
    double sum = 0.0;
    for (int j = 0; j < tokens; ++j) {
      dst[j] = std::exp(dst[j] - peak);
      sum += dst[j];
    }
    for (int j = 0; j < tokens; ++j) dst[j] /= sum;
  });
  return out;
}

}  // namespace panofuse
