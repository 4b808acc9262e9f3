// Command-line front end: sampling, tests, calibration, clustering and the
// Dyck path codec. Exit status: 0 retain (or success), 1 reject, 2 error.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crtforest/errors.hpp"
#include "crtforest/experiment.hpp"
#include "crtforest/hclust.hpp"
#include "crtforest/inference.hpp"
#include "crtforest/newick.hpp"

namespace {

constexpr int kRetain = 0;
constexpr int kReject = 1;
constexpr int kFailure = 2;

// Writes to --out when given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw crt::Error("cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<crt::Tree> read_trees(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw crt::Error("cannot open " + path);
  try {
    return crt::newick::parse_many(in);
  } catch (const crt::Error& e) {
    throw crt::Error(path + ": " + e.what());
  }
}

std::vector<double> read_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw crt::Error("cannot open " + path);
  std::vector<double> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    double v = 0.0;
    const char* b = line.data() + first;
    const char* e = line.data() + last + 1;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) {
      throw crt::Error(path + ": line " + std::to_string(number) + ": not a number");
    }
    values.push_back(v);
  }
  return values;
}

struct LeafOptions {
  std::size_t count = 0;
  double fraction = 0.0;

  crt::LeafSpec spec(std::size_t default_count) const {
    if (fraction > 0.0) return crt::LeafSpec::fraction(fraction);
    return crt::LeafSpec::count(count > 0 ? count : default_count);
  }
};

void add_leaf_options(CLI::App* cmd, LeafOptions& leaves) {
  auto* count = cmd->add_option("--leaf-count", leaves.count, "Leaves per L-tree (default 25)");
  auto* frac = cmd->add_option("--leaf-frac", leaves.fraction, "Fraction of leaves per L-tree")
                   ->check(CLI::Range(0.0, 1.0));
  count->excludes(frac);
}

int report(const crt::TestReport& r, bool json, const std::string& out_path) {
  Output out(out_path);
  out.stream() << (json ? r.to_json() + "\n" : r.to_key_value());
  return r.reject ? kReject : kRetain;
}

std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

crt::DyckPath parse_breakpoints(const std::string& line, std::size_t number) {
  std::vector<crt::DyckPath::Breakpoint> points;
  std::istringstream in(line);
  std::string token;
  while (in >> token) {
    const auto comma = token.find(',');
    double pos = 0.0;
    double height = 0.0;
    const char* b = token.data();
    const char* e = b + token.size();
    if (comma == std::string::npos ||
        std::from_chars(b, b + comma, pos).ptr != b + comma ||
        std::from_chars(b + comma + 1, e, height).ptr != e) {
      throw crt::ParseError("expected position,height", number, 0);
    }
    points.push_back({pos, height});
  }
  return crt::DyckPath::from_breakpoints(points);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random trees, Dyck paths and goodness-of-fit tests for tree samples"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");

  // sample
  std::string model;
  std::string offspring;
  std::size_t n_vertices = 1000;
  std::size_t num_trees = 1;
  std::string lengths = "uniform:0:2";
  std::uint64_t seed = 1;
  std::string out_path;
  auto* sample = app.add_subcommand("sample", "Write random trees as Newick, one per line");
  auto* model_opt = sample->add_option("--model", model, "Scenario, e.g. Geo(0.5), Phylo.bd, gw:bin2:0.5");
  sample->add_option("--offspring", offspring, "Offspring law of a conditioned tree, e.g. geo:0.5")
      ->excludes(model_opt);
  sample->add_option("--n-vertices", n_vertices, "Vertices per tree")->check(CLI::PositiveNumber);
  sample->add_option("--num-trees", num_trees, "Number of trees")->check(CLI::PositiveNumber);
  sample->add_option("--lengths", lengths, "Branch lengths: uniform:a:b, const:c or exp:mean");
  sample->add_option("--seed", seed, "Master seed");
  sample->add_option("--out", out_path, "Output file (default stdout)");

  // test
  std::string mode;
  std::string method = "ltree";
  std::vector<std::string> inputs;
  double alpha = 0.01;
  LeafOptions leaves;
  std::size_t perms = 5000;
  std::string perm_stat = "ltree";
  std::string reference = "chi2";
  bool one_sided = false;
  bool json = false;
  auto* test = app.add_subcommand("test", "Run a one- or two-sample test on Newick files");
  test->add_option("mode", mode, "one or two")->required()->check(CLI::IsMember({"one", "two"}));
  test->add_option("inputs", inputs, "Newick files (one per group)")->required();
  test->add_option("--method", method, "binary, ltree, dyck or perm")
      ->check(CLI::IsMember({"binary", "ltree", "dyck", "perm"}));
  test->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  add_leaf_options(test, leaves);
  test->add_option("--perms", perms, "Permutations for --method perm");
  test->add_option("--perm-stat", perm_stat, "Statistic permuted: ltree, dyck or binary")
      ->check(CLI::IsMember({"ltree", "dyck", "binary"}));
  test->add_option("--reference", reference, "One-sample L-tree reference: chi2 or f")
      ->check(CLI::IsMember({"chi2", "f"}));
  test->add_flag("--one-sided", one_sided, "Two-sample: reject only when group a exceeds group b");
  test->add_option("--seed", seed, "Seed for vertex and leaf choices");
  test->add_flag("--json", json, "Print the report as JSON");
  test->add_option("--out", out_path, "Output file (default stdout)");

  // calibrate
  std::vector<std::string> models;
  std::vector<std::string> methods{"ltree-chi2", "dyck-chi2", "ltree-F", "dyck-F"};
  std::string null_model = "Bin2(0.5)";
  std::size_t trials = 200;
  std::size_t cal_trees = 100;
  auto* calibrate = app.add_subcommand("calibrate", "Monte-Carlo rejection rates as CSV");
  calibrate->add_option("--model", models, "Scenarios for group a (repeatable)")->required();
  calibrate->add_option("--method", methods,
                        "ltree-chi2, dyck-chi2, ltree-F, dyck-F, ltree-perm, dyck-perm");
  calibrate->add_option("--null-model", null_model, "Group b of the two-sample tests");
  calibrate->add_option("--num-trees", cal_trees, "Trees per sample")->check(CLI::PositiveNumber);
  calibrate->add_option("--n-vertices", n_vertices, "Vertices per tree")->check(CLI::PositiveNumber);
  calibrate->add_option("--trials", trials, "Monte-Carlo trials");
  calibrate->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  add_leaf_options(calibrate, leaves);
  calibrate->add_option("--perms", perms, "Permutations for permutation methods");
  calibrate->add_option("--lengths", lengths, "Branch lengths: uniform:a:b, const:c or exp:mean");
  calibrate->add_option("--seed", seed, "Master seed");
  calibrate->add_option("--out", out_path, "CSV file (default stdout)");

  // hclust
  std::string values_path;
  std::vector<std::string> group_a;
  std::vector<std::string> group_b;
  std::string linkage = "single";
  std::vector<double> fractions;
  auto* hclust = app.add_subcommand("hclust", "Cluster intensity vectors into dendrograms");
  auto* values_opt = hclust->add_option("--values", values_path, "One scalar per line; writes a Newick dendrogram");
  auto* ga_opt = hclust->add_option("--group-a", group_a, "Value files of group a (one per subject)");
  auto* gb_opt = hclust->add_option("--group-b", group_b, "Value files of group b (one per subject)");
  ga_opt->needs(gb_opt);
  gb_opt->needs(ga_opt);
  values_opt->excludes(ga_opt);
  hclust->add_option("--linkage", linkage, "single, average or complete")
      ->check(CLI::IsMember({"single", "average", "complete"}));
  hclust->add_option("--leaf-frac", fractions, "Leaf fractions for the two-group test")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  hclust->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  hclust->add_option("--seed", seed, "Seed for vertex and leaf choices");
  hclust->add_flag("--json", json, "Print reports as JSON");
  hclust->add_option("--out", out_path, "Output file (default stdout)");

  // dyck
  std::string input_path;
  auto* dyck = app.add_subcommand("dyck", "Contour path codec");
  dyck->require_subcommand(1);
  auto* encode = dyck->add_subcommand("encode", "Newick trees to breakpoint lists");
  auto* decode = dyck->add_subcommand("decode", "Breakpoint lists to Newick trees");
  for (auto* cmd : {encode, decode}) {
    cmd->add_option("input", input_path, "Input file")->required();
    cmd->add_option("--out", out_path, "Output file (default stdout)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kFailure;
  }

  try {
    if (*sample) {
      const auto scenario = crt::Scenario::parse(!offspring.empty() ? "cgw:" + offspring
                                                 : !model.empty()   ? model
                                                                    : "Geo(0.5)");
      const auto length_spec = crt::BranchLengthSpec::parse(lengths);
      Output out(out_path);
      for (std::size_t i = 0; i < num_trees; ++i) {
        crt::RngStream rng(seed, i);
        out.stream() << crt::newick::write(scenario.sample(n_vertices, length_spec, rng)) << '\n';
      }
      return kRetain;
    }

    if (*test) {
      const bool two = mode == "two";
      if (inputs.size() != (two ? 2U : 1U)) {
        throw crt::DomainError(two ? "two-sample tests take two files" : "one-sample tests take one file");
      }
      const auto a = read_trees(inputs[0]);
      const auto b = two ? read_trees(inputs[1]) : std::vector<crt::Tree>{};
      const auto sides = one_sided ? crt::Sidedness::kGreater : crt::Sidedness::kTwoSided;
      crt::SummaryOptions options;
      options.leaves = leaves.spec(25);

      if (method == "binary") {
        if (two) return report(crt::two_sample_binary_test(a, b, alpha, sides), json, out_path);
        return report(crt::one_sample_binary_test(a, alpha), json, out_path);
      }
      if (method == "perm") {
        if (!two) throw crt::DomainError("permutation tests need two samples");
        std::vector<crt::TreeSummary> sa;
        std::vector<crt::TreeSummary> sb;
        crt::PermutationStatistic kind = crt::PermutationStatistic::kLtreeF;
        if (perm_stat == "binary") {
          kind = crt::PermutationStatistic::kBinaryF;
          for (const auto& t : a) sa.push_back(crt::binary_summary(t));
          for (const auto& t : b) sb.push_back(crt::binary_summary(t));
        } else {
          if (perm_stat == "dyck") kind = crt::PermutationStatistic::kDyckF;
          sa = crt::summarize_all(a, options, seed);
          sb = crt::summarize_all(b, options, seed);
        }
        crt::RngStream rng(seed, 0xFFFF'FFFFULL);
        return report(crt::permutation_two_sample(sa, sb, kind, perms, alpha, rng), json, out_path);
      }
      const auto sa = crt::summarize_all(a, options, seed);
      if (method == "ltree") {
        if (two) {
          return report(crt::two_sample_ltree_test(sa, crt::summarize_all(b, options, seed), alpha, sides),
                        json, out_path);
        }
        const auto ref = reference == "f" ? crt::LtreeReference::kF : crt::LtreeReference::kChi2;
        return report(crt::one_sample_ltree_test(sa, alpha, ref), json, out_path);
      }
      if (two) {
        return report(crt::two_sample_dyck_test(sa, crt::summarize_all(b, options, seed), alpha, sides),
                      json, out_path);
      }
      return report(crt::one_sample_dyck_test(sa, alpha), json, out_path);
    }

    if (*calibrate) {
      crt::CalibrationConfig config;
      config.null_group = crt::Scenario::parse(null_model);
      for (const auto& m : methods) config.methods.push_back(crt::parse_calibration_method(m));
      config.num_trees = cal_trees;
      config.n_vertices = n_vertices;
      config.trials = trials;
      config.alpha = alpha;
      config.summary.leaves = leaves.spec(25);
      config.permutations = perms;
      config.lengths = crt::BranchLengthSpec::parse(lengths);
      config.seed = seed;
      if (std::abs(config.lengths.mean() - 1.0) > 1e-12) {
        std::cerr << "warning: branch length mean is " << config.lengths.mean()
                  << ", not 1; the n^{-1/2} scaling assumes unit mean\n";
      }
      Output out(out_path);
      out.stream() << crt::calibration_csv_header() << '\n';
      for (const auto& m : models) {
        config.scenario = crt::Scenario::parse(m);
        for (const auto& row : crt::run_calibration(config)) out.stream() << crt::to_csv(row) << '\n';
      }
      return kRetain;
    }

    if (*hclust) {
      const auto link = crt::parse_linkage(linkage);
      if (!values_path.empty()) {
        const auto values = read_values(values_path);
        const auto d = crt::agglomerate(values, link);
        const auto h = crt::heterogeneity_summary(d);
        Output out(out_path);
        out.stream() << crt::newick::write(d.tree) << '\n';
        std::cerr << "height=" << format_double(h.height) << '\n'
                  << "total_path_length=" << format_double(h.total_path_length) << '\n'
                  << "branches=" << h.branches << '\n'
                  << "adjusted_merges=" << d.adjusted_merges << '\n';
        if (d.adjusted_merges > 0) {
          std::cerr << "warning: " << d.adjusted_merges
                    << " merge heights raised to keep branch lengths positive\n";
        }
        return kRetain;
      }
      if (group_a.empty()) throw crt::DomainError("give --values or --group-a and --group-b");
      auto cluster = [&](const std::vector<std::string>& files) {
        std::vector<crt::Tree> trees;
        for (const auto& f : files) trees.push_back(crt::agglomerate(read_values(f), link).tree);
        return trees;
      };
      const auto ta = cluster(group_a);
      const auto tb = cluster(group_b);
      if (fractions.empty()) fractions = {0.1, 0.2, 0.3, 0.4};
      Output out(out_path);
      bool any_reject = false;
      for (const double f : fractions) {
        crt::SummaryOptions options;
        options.leaves = crt::LeafSpec::fraction(f);
        const auto r = crt::two_sample_ltree_test(crt::summarize_all(ta, options, seed),
                                                  crt::summarize_all(tb, options, seed), alpha);
        out.stream() << "leaf_fraction=" << f << '\n' << (json ? r.to_json() + "\n" : r.to_key_value());
        any_reject = any_reject || r.reject;
      }
      return any_reject ? kReject : kRetain;
    }

    if (*encode) {
      const auto trees = read_trees(input_path);
      Output out(out_path);
      for (const auto& t : trees) {
        const auto points = crt::dyck_encode(t).breakpoints();
        for (std::size_t i = 0; i < points.size(); ++i) {
          if (i > 0) out.stream() << ' ';
          out.stream() << format_double(points[i].position) << ',' << format_double(points[i].height);
        }
        out.stream() << '\n';
      }
      return kRetain;
    }

    if (*decode) {
      std::ifstream in(input_path);
      if (!in) throw crt::Error("cannot open " + input_path);
      Output out(out_path);
      std::string line;
      std::size_t number = 0;
      while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          out.stream() << crt::newick::write(crt::dyck_decode(parse_breakpoints(line, number))) << '\n';
        } catch (const crt::ParseError& e) {
          throw crt::Error(input_path + ": " + e.what());
        } catch (const crt::Error& e) {
          throw crt::Error(input_path + ": line " + std::to_string(number) + ": " + e.what());
        }
      }
      return kRetain;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kRetain;
}
