#include "earnet/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "earnet/error.hpp"

namespace earnet {

namespace {

double squared_length(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

Embedding Embedding::normalized(std::vector<double> values) {
  const double len = std::sqrt(squared_length(values));
  if (!(len > 0.0) || !std::isfinite(len)) throw Error(ErrorCode::ZeroVector, "embedding has zero or non-finite norm");
  for (double& x : values) x /= len;
  Embedding e;
  e.values_ = std::move(values);
  return e;
}

Embedding Embedding::from_unit(std::vector<double> values) {
  if (std::abs(std::sqrt(squared_length(values)) - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "embedding is not unit norm");
  }
  Embedding e;
  e.values_ = std::move(values);
  return e;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "embedding dimensions differ");
  const double na = squared_length(a);
  const double nb = squared_length(b);
  if (na <= 0.0 || nb <= 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  const double d = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  return std::clamp(d / std::sqrt(na * nb), -1.0, 1.0);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(std::span<const double>(a.values()), std::span<const double>(b.values()));
}

}  // namespace earnet
