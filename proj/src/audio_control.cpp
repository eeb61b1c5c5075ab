#include "earnet/audio_control.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <string>

#include "earnet/error.hpp"

namespace earnet {

namespace {

// The FFTW planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : p(fftw_alloc_real(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* p;
};

struct FftwComplex {
  explicit FftwComplex(std::size_t n) : p(fftw_alloc_complex(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwComplex() { fftw_free(p); }
  FftwComplex(const FftwComplex&) = delete;
  FftwComplex& operator=(const FftwComplex&) = delete;
  fftw_complex* p;
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : p_(p) {
    if (!p_) throw Error(ErrorCode::InvalidArgument, "FFT planning failed");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(p_); }

 private:
  fftw_plan p_;
};

double energy(std::span<const double> x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void check_streams(std::span<const StreamDescriptor> streams) {
  std::set<int> ids;
  for (const auto& s : streams) {
    if (!(s.distanceM > 0.0) || !std::isfinite(s.distanceM)) {
      throw Error(ErrorCode::InvalidArgument, "stream " + std::to_string(s.streamId) + " needs a positive distance");
    }
    if (!ids.insert(s.streamId).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate stream id " + std::to_string(s.streamId));
    }
  }
}

struct Prepared {
  AllocationPlan plan;
  std::vector<std::size_t> variant;  // indices of time-variant streams, ascending stream id
};

Prepared prepare(std::span<const StreamDescriptor> streams, int totalBudget, double thresholdMs) {
  if (totalBudget < 0) throw Error(ErrorCode::InvalidArgument, "budget must be nonnegative");
  check_streams(streams);
  Prepared p;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& s = streams[i];
    const FeatureMode mode = s.measuredDelayMs ? select_mode(*s.measuredDelayMs, thresholdMs) : FeatureMode::TimeVariant;
    p.plan.entries.push_back({s.streamId, 0, mode});
    if (mode == FeatureMode::TimeVariant) p.variant.push_back(i);
  }
  std::sort(p.variant.begin(), p.variant.end(),
            [&](std::size_t a, std::size_t b) { return streams[a].streamId < streams[b].streamId; });
  return p;
}

void finish(AllocationPlan& plan, std::span<const StreamDescriptor> streams) {
  std::vector<int> levels;
  for (const auto& e : plan.entries) levels.push_back(e.level);
  plan.utility = plan_utility(streams, levels);
}

int largest_level_within(double budget) {
  int best = 0;
  for (int l : kBandwidthLevels)
    if (l <= budget) best = l;
  return best;
}

}  // namespace

std::vector<double> cross_correlation(std::span<const double> reference, std::span<const double> received) {
  const double er = energy(reference), ex = energy(received);
  if (!(er > 0.0) || !(ex > 0.0)) throw Error(ErrorCode::ZeroEnergy, "signal has zero energy");

  const std::size_t n = next_pow2(reference.size() + received.size());
  const std::size_t bins = n / 2 + 1;
  FftwBuffer a(n), b(n), c(n);
  FftwComplex fa(bins), fb(bins);
  std::unique_ptr<Plan> pa, pb, pc;
  {
    std::lock_guard lock(planner_mutex());
    pa = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(static_cast<int>(n), a.p, fa.p, FFTW_ESTIMATE));
    pb = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(static_cast<int>(n), b.p, fb.p, FFTW_ESTIMATE));
    pc = std::make_unique<Plan>(fftw_plan_dft_c2r_1d(static_cast<int>(n), fa.p, c.p, FFTW_ESTIMATE));
  }
  std::fill(a.p, a.p + n, 0.0);
  std::fill(b.p, b.p + n, 0.0);
  std::copy(reference.begin(), reference.end(), a.p);
  std::copy(received.begin(), received.end(), b.p);
  pa->execute();
  pb->execute();
  // conj(FFT(reference)) * FFT(received) gives sum_t reference[t] received[t + lag].
  for (std::size_t k = 0; k < bins; ++k) {
    const std::complex<double> x(fa.p[k][0], fa.p[k][1]), y(fb.p[k][0], fb.p[k][1]);
    const auto z = std::conj(x) * y;
    fa.p[k][0] = z.real();
    fa.p[k][1] = z.imag();
  }
  pc->execute();

  const double scale = 1.0 / (static_cast<double>(n) * std::sqrt(er * ex));
  std::vector<double> out(received.size());
  for (std::size_t lag = 0; lag < out.size(); ++lag) out[lag] = c.p[lag] * scale;
  return out;
}

DelayEstimate estimate_delay(std::span<const double> reference, std::span<const double> received,
                             double sampleRateHz) {
  if (!(sampleRateHz > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (reference.empty() || received.empty()) throw Error(ErrorCode::ZeroEnergy, "empty signal");
  const auto xc = cross_correlation(reference, received);
  const double peak = *std::max_element(xc.begin(), xc.end());
  if (!(peak > 0.0)) throw Error(ErrorCode::NoPeak, "no positive correlation at nonnegative lags");

  const double threshold = kFirstPeakFraction * peak;
  std::size_t lag = 0;
  while (lag < xc.size() && xc[lag] < threshold) ++lag;
  if (lag == xc.size()) throw Error(ErrorCode::NoPeak, "no lag reaches the threshold");
  while (lag + 1 < xc.size() && xc[lag + 1] > xc[lag]) ++lag;  // climb to the local maximum

  return {lag, 1000.0 * static_cast<double>(lag) / sampleRateHz, xc[lag]};
}

FeatureMode select_mode(double delayMs, double thresholdMs) {
  if (!(delayMs >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delay must be nonnegative");
  return delayMs <= thresholdMs ? FeatureMode::TimeVariant : FeatureMode::TimeInvariant;
}

const char* to_string(FeatureMode mode) {
  return mode == FeatureMode::TimeVariant ? "time-variant" : "time-invariant";
}

int AllocationPlan::total() const {
  int t = 0;
  for (const auto& e : entries) t += e.level;
  return t;
}

double plan_utility(std::span<const StreamDescriptor> streams, std::span<const int> levels) {
  if (streams.size() != levels.size()) throw Error(ErrorCode::InvalidArgument, "level count mismatch");
  double u = 0.0;
  for (std::size_t i = 0; i < streams.size(); ++i) u += static_cast<double>(levels[i]) / streams[i].distanceM;
  return u;
}

AllocationPlan allocate_exhaustive(std::span<const StreamDescriptor> streams, int totalBudget, double thresholdMs) {
  auto p = prepare(streams, totalBudget, thresholdMs);
  const auto& v = p.variant;
  if (v.size() > kMaxExhaustiveStreams) {
    throw Error(ErrorCode::SizeLimitExceeded, std::to_string(v.size()) + " time-variant streams exceed the exhaustive limit");
  }
  // Lowest id is the most significant digit and levels run high to low, so
  // among equal utilities the first found gives the lowest id the higher level.
  std::vector<int> current(v.size(), 0), best(v.size(), 0);
  double bestUtility = -1.0;
  std::function<void(std::size_t, int, double)> rec = [&](std::size_t k, int spent, double u) {
    if (k == v.size()) {
      if (u > bestUtility + 1e-12 * std::max(1.0, std::abs(bestUtility))) {
        bestUtility = u;
        best = current;
      }
      return;
    }
    for (auto it = kBandwidthLevels.rbegin(); it != kBandwidthLevels.rend(); ++it) {
      if (spent + *it > totalBudget) continue;
      current[k] = *it;
      rec(k + 1, spent + *it, u + *it / streams[v[k]].distanceM);
    }
  };
  rec(0, 0, 0.0);
  for (std::size_t k = 0; k < v.size(); ++k) p.plan.entries[v[k]].level = best[k];
  p.plan.exhaustive = true;
  finish(p.plan, streams);
  return p.plan;
}

AllocationPlan allocate_greedy(std::span<const StreamDescriptor> streams, int totalBudget, double thresholdMs) {
  auto p = prepare(streams, totalBudget, thresholdMs);
  std::vector<std::size_t> step(streams.size(), 0);  // index into kBandwidthLevels
  int remaining = totalBudget;
  for (;;) {
    std::size_t pick = streams.size();
    double bestRatio = 0.0;
    for (auto i : p.variant) {  // ascending id: strict > keeps the lowest id on ties
      if (step[i] + 1 >= kBandwidthLevels.size()) continue;
      const int cost = kBandwidthLevels[step[i] + 1] - kBandwidthLevels[step[i]];
      if (cost > remaining) continue;
      const double ratio = (cost / streams[i].distanceM) / cost;
      if (ratio > bestRatio) {
        bestRatio = ratio;
        pick = i;
      }
    }
    if (pick == streams.size()) break;
    remaining -= kBandwidthLevels[step[pick] + 1] - kBandwidthLevels[step[pick]];
    ++step[pick];
  }
  for (auto i : p.variant) p.plan.entries[i].level = kBandwidthLevels[step[i]];
  p.plan.exhaustive = false;
  finish(p.plan, streams);
  return p.plan;
}

AllocationPlan allocate_equal_split(std::span<const StreamDescriptor> streams, int totalBudget, double thresholdMs) {
  auto p = prepare(streams, totalBudget, thresholdMs);
  if (!p.variant.empty()) {
    const int level = largest_level_within(static_cast<double>(totalBudget) / static_cast<double>(p.variant.size()));
    for (auto i : p.variant) p.plan.entries[i].level = level;
  }
  p.plan.exhaustive = false;
  finish(p.plan, streams);
  return p.plan;
}

AllocationPlan allocate_waterfall(std::span<const StreamDescriptor> streams, int totalBudget, double thresholdMs) {
  auto p = prepare(streams, totalBudget, thresholdMs);
  int remaining = totalBudget;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    if (p.plan.entries[i].mode != FeatureMode::TimeVariant) continue;
    const int level = largest_level_within(remaining);
    p.plan.entries[i].level = level;
    remaining -= level;
  }
  p.plan.exhaustive = false;
  finish(p.plan, streams);
  return p.plan;
}

AllocationPlan allocate_bandwidth(std::span<const StreamDescriptor> streams, int totalBudget, double thresholdMs) {
  const auto p = prepare(streams, totalBudget, thresholdMs);
  return p.variant.size() <= kMaxExhaustiveStreams ? allocate_exhaustive(streams, totalBudget, thresholdMs)
                                                   : allocate_greedy(streams, totalBudget, thresholdMs);
}

}  // namespace earnet
