#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace earnet {

/// Unit-norm speaker embedding (d-vector).
class Embedding {
 public:
  Embedding() = default;

  /// Normalizes `values`; throws ZeroVector for an all-zero input.
  static Embedding normalized(std::vector<double> values);

  /// Keeps `values` bit-exact; throws InvalidArgument unless the norm is 1 within 1e-6.
  static Embedding from_unit(std::vector<double> values);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

 private:
  std::vector<double> values_;
};

inline constexpr std::size_t kDefaultEmbeddingDim = 256;

double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const Embedding& a, const Embedding& b);

}  // namespace earnet
