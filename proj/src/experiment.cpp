#include "crtforest/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <regex>
#include <sstream>
#include <thread>

#include "crtforest/errors.hpp"

namespace crt {

Scenario Scenario::parse(std::string_view text) {
  const std::string s(text);
  static const std::regex alias(R"(^(Geo|Bin|Bin2)\(([0-9.eE+-]+)\)$)");
  static const std::regex gw_alias(R"(^GW-Bin\(2,\s*([0-9.eE+-]+)\)$)");
  Scenario sc;
  sc.name_ = s;
  std::smatch m;
  if (std::regex_match(s, m, alias)) {
    const std::string family = m[1] == "Geo" ? "geo" : m[1] == "Bin" ? "strictbin" : "bin2";
    sc.offspring_ = parse_offspring(family + ":" + m[2].str());
    sc.round_size_ = true;
    return sc;
  }
  if (std::regex_match(s, m, gw_alias)) {
    sc.kind_ = Kind::kUnconditioned;
    sc.offspring_ = parse_offspring("bin2:" + m[1].str());
    return sc;
  }
  if (s == "Phylo.bd") {
    sc.kind_ = Kind::kBirthDeath;
    return sc;
  }
  if (s == "Phylo.coal" || s == "coal") {
    sc.kind_ = Kind::kCoalescent;
    return sc;
  }
  if (s.rfind("cgw:", 0) == 0) {
    sc.offspring_ = parse_offspring(s.substr(4));
    return sc;
  }
  if (s.rfind("gw:", 0) == 0) {
    sc.kind_ = Kind::kUnconditioned;
    sc.offspring_ = parse_offspring(s.substr(3));
    return sc;
  }
  if (s.rfind("bd:", 0) == 0) {
    sc.kind_ = Kind::kBirthDeath;
    std::istringstream in(s.substr(3));
    char colon = 0;
    if (!(in >> sc.speciation_) || (in >> colon && (colon != ':' || !(in >> sc.extinction_)))) {
      throw DomainError("cannot parse birth-death scenario '" + s + "'");
    }
    return sc;
  }
  // A bare offspring spec means a conditioned tree.
  try {
    sc.offspring_ = parse_offspring(s);
    return sc;
  } catch (const DomainError&) {
    throw DomainError("unknown scenario '" + s + "'");
  }
}

std::size_t Scenario::feasible_size(std::size_t n) const {
  if (kind_ != Kind::kConditioned || n <= 1) return n;
  const OffspringPmf& pmf = offspring_->tilted;
  if (pmf.is_geometric()) return n;
  std::size_t g = 0;
  const auto& probs = pmf.probabilities();
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > 0.0) g = std::gcd(g, k);
  }
  while ((n - 1) % g != 0) ++n;
  return n;
}

Tree Scenario::sample(std::size_t n, const BranchLengthSpec& lengths, RngStream& rng) const {
  switch (kind_) {
    case Kind::kConditioned:
      return sample_cgw(*offspring_, round_size_ ? feasible_size(n) : n, lengths, rng);
    case Kind::kUnconditioned:
      return sample_gw_unconditioned(*offspring_, n, lengths, rng).tree;
    case Kind::kBirthDeath:
      return sample_birth_death(std::max<std::size_t>(2, (n + 1) / 2), speciation_, extinction_, rng);
    case Kind::kCoalescent:
      return sample_coalescent(std::max<std::size_t>(2, (n + 1) / 2), rng);
  }
  throw DomainError("unknown scenario kind");
}

CalibrationMethod parse_calibration_method(std::string_view name) {
  if (name == "ltree-chi2") return CalibrationMethod::kLtreeChi2;
  if (name == "dyck-chi2") return CalibrationMethod::kDyckChi2;
  if (name == "ltree-F") return CalibrationMethod::kLtreeF;
  if (name == "dyck-F") return CalibrationMethod::kDyckF;
  if (name == "ltree-perm") return CalibrationMethod::kLtreePerm;
  if (name == "dyck-perm") return CalibrationMethod::kDyckPerm;
  throw DomainError("unknown calibration method '" + std::string(name) + "'");
}

std::string to_string(CalibrationMethod method) {
  switch (method) {
    case CalibrationMethod::kLtreeChi2:
      return "ltree-chi2";
    case CalibrationMethod::kDyckChi2:
      return "dyck-chi2";
    case CalibrationMethod::kLtreeF:
      return "ltree-F";
    case CalibrationMethod::kDyckF:
      return "dyck-F";
    case CalibrationMethod::kLtreePerm:
      return "ltree-perm";
    case CalibrationMethod::kDyckPerm:
      return "dyck-perm";
  }
  return "unknown";
}

bool is_two_sample(CalibrationMethod method) {
  return method != CalibrationMethod::kLtreeChi2 && method != CalibrationMethod::kDyckChi2;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("CRT_FOREST_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

namespace {

std::vector<TreeSummary> sample_group(const Scenario& scenario, const CalibrationConfig& c,
                                      RngStream rng) {
  std::vector<TreeSummary> out;
  out.reserve(c.num_trees);
  for (std::size_t i = 0; i < c.num_trees; ++i) {
    const Tree tree = scenario.sample(c.n_vertices, c.lengths, rng);
    out.push_back(summarize(tree, c.summary, rng));
  }
  return out;
}

std::vector<std::uint8_t> run_trial(const CalibrationConfig& c, std::size_t trial) {
  const RngStream base(c.seed, trial);
  const auto a = sample_group(c.scenario, c, base.substream(0));
  std::vector<TreeSummary> b;
  if (std::any_of(c.methods.begin(), c.methods.end(), is_two_sample)) {
    b = sample_group(c.null_group, c, base.substream(1));
  }
  std::vector<std::uint8_t> rejects;
  for (std::size_t m = 0; m < c.methods.size(); ++m) {
    TestReport r;
    RngStream perm_rng = base.substream(2 + m);
    switch (c.methods[m]) {
      case CalibrationMethod::kLtreeChi2:
        r = one_sample_ltree_test(a, c.alpha);
        break;
      case CalibrationMethod::kDyckChi2:
        r = one_sample_dyck_test(a, c.alpha);
        break;
      case CalibrationMethod::kLtreeF:
        r = two_sample_ltree_test(a, b, c.alpha);
        break;
      case CalibrationMethod::kDyckF:
        r = two_sample_dyck_test(a, b, c.alpha);
        break;
      case CalibrationMethod::kLtreePerm:
        r = permutation_two_sample(a, b, PermutationStatistic::kLtreeF, c.permutations, c.alpha,
                                   perm_rng);
        break;
      case CalibrationMethod::kDyckPerm:
        r = permutation_two_sample(a, b, PermutationStatistic::kDyckF, c.permutations, c.alpha,
                                   perm_rng);
        break;
    }
    rejects.push_back(r.reject ? 1 : 0);
  }
  return rejects;
}

}  // namespace

std::vector<CalibrationRow> run_calibration(const CalibrationConfig& config) {
  if (config.trials == 0) throw DomainError("trials must be positive");
  if (config.num_trees == 0) throw DomainError("num_trees must be positive");
  if (config.methods.empty()) throw DomainError("no calibration method selected");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");

  std::vector<std::vector<std::uint8_t>> results(config.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= config.trials) return;
      try {
        results[t] = run_trial(config, t);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.trials;
        return;
      }
    }
  };
  const std::size_t threads =
      std::min(config.trials, config.threads > 0 ? config.threads : default_thread_count());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CalibrationRow> rows;
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    std::size_t count = 0;
    for (const auto& r : results) count += r[m];
    rows.push_back({config.scenario.name(), config.methods[m], config.num_trees, config.alpha,
                    config.trials, count,
                    static_cast<double>(count) / static_cast<double>(config.trials), config.seed});
  }
  return rows;
}

std::string calibration_csv_header() {
  return "distribution,method,sample_size,alpha,trials,reject_rate,seed";
}

std::string to_csv(const CalibrationRow& row) {
  std::ostringstream out;
  out << '"' << row.distribution << '"' << ',' << to_string(row.method) << ',' << row.sample_size
      << ',' << row.alpha << ',' << row.trials << ',' << row.reject_rate << ',' << row.seed;
  return out.str();
}

}  // namespace crt
