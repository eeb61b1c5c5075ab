#include "earnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "json_fields.hpp"

namespace earnet {

using detail::Fields;
using detail::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string run_csv(const std::vector<WindowRow>& rows) {
  std::ostringstream out;
  out << "# schema: " << kRunCsvSchema << "\n";
  out << "batchIndex,frame,timestamp,fresh,orientationErrorDeg,positionErrorM,setupAccuracy,costBefore,costAfter,"
         "iterations,wallTimeMs\n";
  for (const auto& r : rows) {
    out << r.batchIndex << ',' << r.frame << ',' << format_number(r.timestamp) << ',' << (r.fresh ? 1 : 0) << ','
        << format_number(r.metrics.orientationErrorDeg) << ',' << format_number(r.metrics.positionErrorM) << ','
        << format_number(r.metrics.setupAccuracy) << ',' << format_number(r.costBefore) << ','
        << format_number(r.costAfter) << ',' << r.iterations << ',' << format_number(r.wallTimeMs) << '\n';
  }
  return out.str();
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  scenario.validate();
  if (seeds.empty()) fail("seeds: must not be empty");
  if (numObservations < 2) fail("numObservations: must be at least 2");
  if (!(batchIntervalS > 0.0) || !std::isfinite(batchIntervalS)) fail("batchIntervalS: must be positive");
  if (budget < 0) fail("budget: must be nonnegative");
  if (!(thresholdMs >= 0.0) || !std::isfinite(thresholdMs)) fail("thresholdMs: must be nonnegative");
  for (auto n : numNodes)
    if (n < 2) fail("axes.numNodes: values must be at least 2");
  for (double v : speed)
    if (!(v >= 0.0) || !std::isfinite(v)) fail("axes.speed: values must be finite and nonnegative");
  for (double v : doaSigmaDeg)
    if (!(v >= 0.0) || !std::isfinite(v)) fail("axes.doaSigmaDeg: values must be finite and nonnegative");
  for (auto n : observations)
    if (n < 2) fail("axes.observations: values must be at least 2");
  for (int b : budgets)
    if (b < 0) fail("axes.budget: values must be nonnegative");
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, path + ": cannot read file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T, typename Read>
std::vector<T> list(Fields& axes, std::string_view key, Read read) {
  std::vector<T> out;
  if (!axes.has(key)) return out;
  const auto& v = axes.at(key);
  if (!v.is_array()) axes.fail(key, "expected an array");
  for (const auto& x : v) {
    const auto item = read(x);
    if (!item) axes.fail(key, "unexpected value " + x.dump());
    out.push_back(*item);
  }
  return out;
}

std::optional<std::size_t> as_count(const json& x) {
  if (!x.is_number_unsigned()) return std::nullopt;
  return x.get<std::size_t>();
}

std::optional<double> as_number(const json& x) {
  if (!x.is_number()) return std::nullopt;
  return x.get<double>();
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, std::string_view source,
                                         const std::string& baseDir) {
  const json j = detail::parse_json(text, source);
  Fields f(j, "", text, source);
  ExperimentConfig c;
  if (f.has("schema") && f.string("schema") != kExperimentSchema) {
    f.fail("schema", "expected \"" + std::string(kExperimentSchema) + "\"");
  }
  const auto& sc = f.at("scenario");
  if (sc.is_string()) {
    const auto path = (std::filesystem::path(baseDir) / sc.get<std::string>()).string();
    const std::string body = read_file(path);
    const json sj = detail::parse_json(body, path);
    Fields sf(sj, "", body, path);
    c.scenario = detail::read_config(sf);
  } else if (sc.is_object()) {
    auto sf = f.object("scenario");
    c.scenario = detail::read_config(sf);
  } else {
    f.fail("scenario", "expected a config object or a path to one");
  }

  const auto& seeds = f.at("seeds");
  if (!seeds.is_array()) f.fail("seeds", "expected an array of nonnegative integers");
  for (const auto& s : seeds) {
    if (!s.is_number_unsigned()) f.fail("seeds", "expected an array of nonnegative integers");
    c.seeds.push_back(s.get<std::uint64_t>());
  }
  c.numObservations = f.uint("numObservations", c.numObservations);
  c.batchIntervalS = f.number("batchIntervalS", c.batchIntervalS);
  const double budget = f.number("budget", c.budget);
  if (budget != std::floor(budget) || std::abs(budget) > 1e9) f.fail("budget", "expected an integer");
  c.budget = static_cast<int>(budget);
  c.thresholdMs = f.number("thresholdMs", c.thresholdMs);

  if (f.has("axes")) {
    auto axes = f.object("axes");
    c.numNodes = list<std::size_t>(axes, "numNodes", as_count);
    c.roomSize = list<RoomClass>(axes, "roomSize", [](const json& x) -> std::optional<RoomClass> {
      return x.is_string() ? parse_room_class(x.get<std::string>()) : std::nullopt;
    });
    c.speed = list<double>(axes, "speed", as_number);
    c.doaSigmaDeg = list<double>(axes, "doaSigmaDeg", as_number);
    c.observations = list<std::size_t>(axes, "observations", as_count);
    c.budgets = list<int>(axes, "budget", [](const json& x) -> std::optional<int> {
      if (!x.is_number_integer()) return std::nullopt;
      return x.get<int>();
    });
    axes.finish();
  }
  f.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string(source) + ": " + e.what());
  }
  return c;
}

Summary summarize(std::vector<double> samples) {
  std::erase_if(samples, [](double v) { return !std::isfinite(v); });
  Summary s;
  s.count = samples.size();
  if (samples.empty()) {
    s.median = s.q1 = s.q3 = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::sort(samples.begin(), samples.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, samples.size() - 1);
    return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
  };
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  return s;
}

namespace {

const std::vector<std::string> kPoseMetrics{"orientationErrorDeg", "positionErrorM", "setupAccuracy"};
const std::vector<std::string> kBudgetMetrics{"utility", "greedyUtility", "equalSplitUtility", "waterfallUtility"};

struct Job {
  SimulationConfig config;
  std::size_t observations = 0;
  std::optional<int> budget;  // set on the budget axis
};

struct Sample {
  bool solved = false;
  std::vector<double> metrics;
};

Sample run_job(const Job& job, std::uint64_t seed, const ExperimentConfig& exp) {
  const Scenario sc = generate_scenario(job.config, seed);
  PipelineOptions opt;
  opt.batchIntervalS = exp.batchIntervalS;
  const ColdStart cs = cold_start(sc, job.observations, opt);
  Sample s;
  s.solved = cs.solved;
  if (!job.budget) {
    s.metrics = {cs.metrics.orientationErrorDeg, cs.metrics.positionErrorM, cs.metrics.setupAccuracy};
    return s;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!cs.solved) {
    s.metrics.assign(kBudgetMetrics.size(), nan);
    return s;
  }
  // Node 0 listens; every other node is a relay stream at its estimated distance.
  std::vector<StreamDescriptor> streams;
  for (std::size_t n = 1; n < cs.estimated.size(); ++n) {
    const double d = norm(cs.estimated[n].position - cs.estimated[0].position);
    streams.push_back({static_cast<int>(cs.estimated[n].nodeId), std::max(d, kMinPlausibleDistanceM), std::nullopt});
  }
  const int b = *job.budget;
  s.metrics = {allocate_bandwidth(streams, b, exp.thresholdMs).utility,
               allocate_greedy(streams, b, exp.thresholdMs).utility,
               allocate_equal_split(streams, b, exp.thresholdMs).utility,
               allocate_waterfall(streams, b, exp.thresholdMs).utility};
  return s;
}

}  // namespace

std::vector<SweepTable> run_sweep(const ExperimentConfig& exp, unsigned workers) {
  exp.validate();
  SimulationConfig base = exp.scenario;
  // Long enough that every cold start finds its batches.
  std::size_t maxObs = exp.numObservations;
  for (auto n : exp.observations) maxObs = std::max(maxObs, n);
  base.durationS = std::max(base.durationS, 1.5 * static_cast<double>(maxObs) * exp.batchIntervalS + 10.0);

  struct Point {
    std::size_t table;
    std::string value;
    Job job;
  };
  std::vector<SweepTable> tables;
  std::vector<Point> points;
  auto add_axis = [&](const std::string& axis, bool budgetAxis, auto values, auto apply, auto label) {
    if (values.empty()) return;
    tables.push_back({axis, budgetAxis ? kBudgetMetrics : kPoseMetrics, {}});
    for (const auto& v : values) {
      Job job{base, exp.numObservations, std::nullopt};
      apply(job, v);
      points.push_back({tables.size() - 1, label(v), job});
    }
  };
  add_axis("numNodes", false, exp.numNodes, [](Job& j, std::size_t n) {
             j.config.numNodes = n;
             j.config.groupSize = std::min(j.config.groupSize, n);
           },
           [](std::size_t n) { return std::to_string(n); });
  add_axis("roomSize", false, exp.roomSize, [](Job& j, RoomClass r) { j.config.roomClass = r; },
           [](RoomClass r) { return to_string(r); });
  add_axis("speed", false, exp.speed, [](Job& j, double v) { j.config.speed = v; }, format_number);
  add_axis("doaSigmaDeg", false, exp.doaSigmaDeg, [](Job& j, double v) { j.config.noise.doaSigmaDeg = v; },
           format_number);
  add_axis("observations", false, exp.observations, [](Job& j, std::size_t n) { j.observations = n; },
           [](std::size_t n) { return std::to_string(n); });
  add_axis("budget", true, exp.budgets, [](Job& j, int b) { j.budget = b; }, [](int b) { return std::to_string(b); });

  for (const auto& p : points) p.job.config.validate();

  // Fan out (point, seed) pairs; each writes only its own slot.
  std::vector<std::uint64_t> seeds = exp.seeds;
  std::sort(seeds.begin(), seeds.end());
  const std::size_t total = points.size() * seeds.size();
  std::vector<Sample> samples(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        samples[i] = run_job(points[i / seeds.size()].job, seeds[i % seeds.size()], exp);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(total, 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t p = 0; p < points.size(); ++p) {
    auto& table = tables[points[p].table];
    SweepPoint sp;
    sp.value = points[p].value;
    sp.seeds = seeds.size();
    for (std::size_t m = 0; m < table.metricNames.size(); ++m) {
      std::vector<double> v;
      for (std::size_t s = 0; s < seeds.size(); ++s) v.push_back(samples[p * seeds.size() + s].metrics[m]);
      sp.metrics.push_back(summarize(std::move(v)));
    }
    for (std::size_t s = 0; s < seeds.size(); ++s) sp.solved += samples[p * seeds.size() + s].solved;
    table.points.push_back(std::move(sp));
  }
  return tables;
}

std::string sweep_csv(const SweepTable& table) {
  std::ostringstream out;
  out << "# schema: " << kSweepCsvSchema << " axis=" << table.axis << "\n";
  out << table.axis << ",seeds,solved";
  for (const auto& m : table.metricNames) out << ',' << m << "_median," << m << "_q1," << m << "_q3";
  out << '\n';
  for (const auto& p : table.points) {
    out << p.value << ',' << p.seeds << ',' << p.solved;
    for (const auto& s : p.metrics) {
      out << ',' << format_number(s.median) << ',' << format_number(s.q1) << ',' << format_number(s.q3);
    }
    out << '\n';
  }
  return out.str();
}

AllocationRequest parse_allocation_request(std::string_view text, std::string_view source) {
  const json j = detail::parse_json(text, source);
  Fields f(j, "", text, source);
  AllocationRequest r;
  if (f.has("schema") && f.string("schema") != kAllocationSchema) {
    f.fail("schema", "expected \"" + std::string(kAllocationSchema) + "\"");
  }
  const double budget = f.number("budget", 0.0);
  if (budget != std::floor(budget) || budget < 0.0 || budget > 1e9) f.fail("budget", "expected a nonnegative integer");
  r.budget = static_cast<int>(budget);
  r.thresholdMs = f.number("thresholdMs", r.thresholdMs);
  if (!(r.thresholdMs >= 0.0)) f.fail("thresholdMs", "must be nonnegative");
  const auto& streams = f.at("streams");
  if (!streams.is_array()) f.fail("streams", "expected an array of stream objects");
  std::set<int> ids;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    Fields s(streams[i], "/streams/" + std::to_string(i), text, source);
    StreamDescriptor d;
    const double id = s.number("id");
    if (id != std::floor(id) || std::abs(id) > 1e9) s.fail("id", "expected an integer");
    d.streamId = static_cast<int>(id);
    if (!ids.insert(d.streamId).second) s.fail("id", "duplicate stream id " + std::to_string(d.streamId));
    d.distanceM = s.number("distanceM");
    if (!(d.distanceM > 0.0) || !std::isfinite(d.distanceM)) s.fail("distanceM", "must be positive");
    if (s.has("delayMs")) {
      d.measuredDelayMs = s.number("delayMs");
      if (!(*d.measuredDelayMs >= 0.0)) s.fail("delayMs", "must be nonnegative");
    }
    s.finish();
    r.streams.push_back(d);
  }
  f.finish();
  return r;
}

std::string allocation_report_json(const AllocationRequest& r) {
  const auto plan = allocate_bandwidth(r.streams, r.budget, r.thresholdMs);
  json j;
  j["schema"] = kAllocationSchema;
  j["budget"] = r.budget;
  j["thresholdMs"] = r.thresholdMs;
  j["strategy"] = plan.exhaustive ? "exhaustive" : "greedy";
  j["utility"] = plan.utility;
  j["total"] = plan.total();
  j["entries"] = json::array();
  for (const auto& e : plan.entries) {
    j["entries"].push_back({{"id", e.streamId}, {"level", e.level}, {"mode", to_string(e.mode)}});
  }
  j["baselines"] = {{"greedy", allocate_greedy(r.streams, r.budget, r.thresholdMs).utility},
                    {"equalSplit", allocate_equal_split(r.streams, r.budget, r.thresholdMs).utility},
                    {"waterfall", allocate_waterfall(r.streams, r.budget, r.thresholdMs).utility}};
  return j.dump(2) + "\n";
}

}  // namespace earnet
