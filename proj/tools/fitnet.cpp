// fitnet command-line driver: simulate, estimate, theory, winners, rank, report.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fitnet/fitnet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// Defaults shared by theory, winners and report.
constexpr double kLambda = 3.316;
constexpr double kEtaMax = 2.0;
constexpr double kBetaMax = 2.0;
constexpr double kGammaInit = 1.8;
constexpr double kT = 13.0;
constexpr double kKtg = 1000.0;
constexpr double kTheoryC = 0.91;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw fitnet::IoError("cannot open " + path.string() + " for writing");
  out.precision(12);
  return out;
}

void write_manifest(const fs::path& path, const std::string& command, const json& config, const json& outputs) {
  json m;
  m["tool"] = "fitnet";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config;
  m["outputs"] = outputs;
  m["threads"] = fitnet::thread_count();
  auto out = open_out(path);
  out << m.dump(2) << '\n';
  if (!out) throw fitnet::IoError("cannot write " + path.string());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

// ---------------------------------------------------------------- estimate

struct FitOptions {
  double r = 0.8;
  std::string zero_rule = "events";
  std::string time = "ordinal";
  std::uint64_t k_min = 10;
  std::size_t min_tail = 1000;
  std::optional<double> beta_max;

  fitnet::GrowthFitOptions growth() const {
    fitnet::GrowthFitOptions g;
    g.rule = zero_rule == "factor" ? fitnet::ZeroGrowthRule::GrowthFactor : fitnet::ZeroGrowthRule::IncreaseEvents;
    return g;
  }

  json to_json() const {
    json j{{"r", r}, {"zero_rule", zero_rule}, {"time", time}, {"k_min", k_min}, {"min_tail", min_tail}};
    j["beta_max"] = beta_max ? json(*beta_max) : json(nullptr);
    return j;
  }
};

void add_fit_flags(CLI::App* app, FitOptions& o) {
  app->add_option("--r", o.r, "Pearson r threshold for measurable fits")->check(CLI::Range(0.0, 1.0));
  app->add_option("--zero-rule", o.zero_rule, "Zero-growth rule: events or factor")
      ->check(CLI::IsMember({"events", "factor"}));
  app->add_option("--time", o.time, "Time axis: ordinal, step, or age (needs ground_truth.tsv)")
      ->check(CLI::IsMember({"ordinal", "step", "age"}));
  app->add_option("--k-min", o.k_min, "Lower cutoff for power-law fits")->check(CLI::PositiveNumber);
  app->add_option("--min-tail", o.min_tail, "Minimum tail size for power-law fits");
  app->add_option("--fit-beta-max", o.beta_max, "Fix the support of the fitted exponent distribution");
}

struct Analysis {
  fitnet::SnapshotSeries series;
  fitnet::AccumulatedSeries acc;
  std::vector<fitnet::GrowthFit> fits;
  std::vector<fitnet::GrowthFit> good;  // measurable
  std::vector<double> timestamps;
};

Analysis analyse(const fs::path& dir, const FitOptions& o) {
  Analysis a;
  a.series = fitnet::read_series(dir);
  if (a.series.size() < 2) throw fitnet::SeriesError("need at least 2 snapshots in " + dir.string());
  a.acc = fitnet::accumulate(a.series);
  for (const auto& d : a.series.descriptors()) a.timestamps.push_back(static_cast<double>(d.timestamp));
  if (o.time == "ordinal") {
    a.fits = fitnet::fit_all(a.acc, o.growth());
  } else if (o.time == "step") {
    a.fits = fitnet::fit_all(a.acc, o.growth(), a.timestamps);
  } else {
    std::unordered_map<fitnet::NodeId, double> birth;
    for (const auto& r : fitnet::read_ground_truth(dir / "ground_truth.tsv"))
      birth[r.id] = static_cast<double>(r.birth_step);
    a.fits = fitnet::fit_all_by_age(a.acc, a.timestamps, birth, o.growth());
  }
  a.good = fitnet::measurable(a.fits, o.r);
  return a;
}

std::vector<double> positive_betas(const std::vector<fitnet::GrowthFit>& fits) {
  std::vector<double> out;
  for (const auto& f : fits)
    if (f.beta > 0.0) out.push_back(f.beta);
  return out;
}

// initial accumulated degree of nodes present in the first snapshot
std::vector<std::pair<fitnet::NodeId, std::uint32_t>> initial_degrees(const fitnet::AccumulatedSeries& acc) {
  std::vector<std::pair<fitnet::NodeId, std::uint32_t>> out;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto v = acc.view(i);
    if (v.first == 1) out.emplace_back(v.id, v.kstar.front());
  }
  return out;
}

std::optional<fitnet::ExponentialFit> try_exponential(const std::vector<fitnet::GrowthFit>& good, const FitOptions& o,
                                                      std::string& error) {
  try {
    fitnet::ExponentialFitOptions eo;
    eo.beta_max = o.beta_max;
    return fitnet::fit_exponential(positive_betas(good), eo);
  } catch (const fitnet::Error& e) {
    error = e.what();
    return std::nullopt;
  }
}

void write_fits_csv(const fs::path& path, const Analysis& a) {
  auto out = open_out(path);
  out << "id,beta,intercept,r,points,zero_growth\n";
  for (const auto& f : a.fits)
    out << csv_field(a.series.label(f.id)) << ',' << f.beta << ',' << f.intercept << ',' << f.pearson_r << ','
        << f.points_used << ',' << (f.zero_growth ? 1 : 0) << '\n';
  if (!out) throw fitnet::IoError("cannot write " + path.string());
}

int cmd_estimate(const fs::path& in, fs::path out_csv, fs::path report_path, const FitOptions& o) {
  if (out_csv.empty()) out_csv = in / "fits.csv";
  if (report_path.empty()) report_path = out_csv.parent_path() / "estimate_report.txt";
  const Analysis a = analyse(in, o);
  write_fits_csv(out_csv, a);

  std::ostringstream rep;
  rep.precision(8);
  rep << "snapshots = " << a.series.size() << "\nnodes = " << a.acc.size() << "\nfitted = " << a.fits.size()
      << "\nmalformed_lines = " << a.series.malformed_lines() << "\nnonzero_growth_fraction = "
      << fitnet::nonzero_growth_fraction(a.fits) << "\nmeasurable = " << a.good.size() << "\nr_threshold = " << o.r
      << '\n';
  if (!a.good.empty()) {
    double r_sum = 0.0;
    for (const auto& f : a.good) r_sum += f.pearson_r;
    rep << "measurable_mean_r = " << r_sum / static_cast<double>(a.good.size()) << '\n';
  }
  std::string err;
  if (auto ef = try_exponential(a.good, o, err)) {
    rep << "exponent_lambda = " << ef->lambda << "\nexponent_beta_max = " << ef->beta_max
        << "\nexponent_log10_slope = " << ef->log10_slope << "\nexponent_r_squared = " << ef->goodness
        << "\nexponent_samples = " << ef->samples << '\n';
  } else {
    rep << "exponent_fit = unavailable (" << err << ")\n";
  }
  const auto tv = fitnet::turnover(a.series);
  rep << "turnover_inserted = " << tv.total_inserted << "\nturnover_removed = " << tv.total_removed
      << "\nturnover_c = " << tv.c_estimate << '\n';

  std::vector<std::uint32_t> last_degrees;
  for (const auto& [id, k] : fitnet::in_degrees(*a.series.load(static_cast<std::uint32_t>(a.series.size()))))
    last_degrees.push_back(k);
  try {
    fitnet::PowerLawFitOptions po;
    po.k_min = o.k_min;
    po.min_tail = o.min_tail;
    const auto pl = fitnet::fit_power_law(last_degrees, po);
    rep << "in_degree_gamma_mle = " << pl.gamma_mle << "\nin_degree_gamma_ccdf = " << pl.gamma_ccdf
        << "\nin_degree_ccdf_r_squared = " << pl.ccdf_r_squared << "\nin_degree_ks = " << pl.ks_distance
        << "\nin_degree_tail = " << pl.tail_samples << '\n';
  } catch (const fitnet::Error& e) {
    rep << "in_degree_fit = unavailable (" << e.what() << ")\n";
  }
  const auto k0 = initial_degrees(a.acc);
  const auto prof = fitnet::fitness_vs_experience(a.good, k0);
  if (auto s = fitnet::experience_decay_slope(prof)) rep << "experience_decay_slope = " << *s << '\n';
  rep << "experience_empty_bins = " << prof.skipped.size() << '\n';

  auto rf = open_out(report_path);
  rf << rep.str();
  std::cout << rep.str();
  std::cout << "fits written to " << out_csv.string() << '\n';
  write_manifest(fs::path(out_csv.string() + ".manifest.json"), "estimate",
                 json{{"in", in.string()}, {"options", o.to_json()}},
                 json{{"fits", out_csv.string()}, {"report", report_path.string()}});
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimFlags {
  std::string config;
  std::string out;
  std::map<std::string, std::string> overrides;
};

// A manifest.json from an earlier run is accepted in place of a config file.
fitnet::ModelParams params_from_manifest(const fs::path& path, const fitnet::ModelParams& base) {
  std::ifstream in(path);
  if (!in) throw fitnet::IoError("cannot open " + path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw fitnet::FormatError(path.string() + ": " + e.what());
  }
  const json& p = m.contains("params") ? m["params"] : m;
  if (!p.is_object()) throw fitnet::FormatError(path.string() + ": no params block");
  std::ostringstream kv;
  kv.precision(17);
  for (const auto& [key, value] : p.items()) {
    if (value.is_string()) kv << key << " = " << value.get<std::string>() << '\n';
    else kv << key << " = " << value.dump() << '\n';
  }
  std::istringstream is(kv.str());
  return fitnet::parse_params(is, base);
}

int cmd_simulate(const SimFlags& f) {
  // CLI defaults: m = 5, c = 0.91, TruncExp(3.316, 2.0), 13 snapshots of 1000 steps
  fitnet::ModelParams base;
  base.m = 5;
  base.c = kTheoryC;
  base.fitness_dist = fitnet::fitness::TruncatedExponential{kLambda, kEtaMax};
  base.total_steps = 13000;
  base.snapshot_interval = 1000;
  base.seed = 1;
  if (!f.config.empty())
    base = fs::path(f.config).extension() == ".json" ? params_from_manifest(f.config, base)
                                                      : fitnet::load_params(f.config, base);
  std::ostringstream kv;
  for (const auto& [k, v] : f.overrides) kv << k << " = " << v << '\n';
  std::istringstream is(kv.str());
  const fitnet::ModelParams p = fitnet::parse_params(is, base);

  const fs::path out = f.out;
  const auto summary = fitnet::run_to_directory(p, out);
  {
    auto cfg = open_out(out / "config.txt");
    fitnet::write_params(cfg, p);
  }
  std::uint64_t inserted = 0;
  std::uint64_t deleted = 0;
  for (const auto& iv : summary.intervals) {
    inserted += iv.inserted;
    deleted += iv.deleted;
  }
  std::cout << "snapshots = " << summary.snapshots << "\ninserted = " << inserted << "\ndeleted = " << deleted
            << "\noutput = " << out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- theory

fitnet::FitnessDistribution make_fitness(const std::string& family, double lambda, double eta_max,
                                         const std::string& file) {
  if (family == "delta") return fitnet::fitness::Delta{eta_max};
  if (family == "trunc-exp") return fitnet::fitness::TruncatedExponential{lambda, eta_max};
  if (family == "uniform") return fitnet::fitness::Uniform{eta_max};
  if (file.empty()) throw fitnet::ParameterError("--fitness empirical requires --fitness-file");
  return fitnet::fitness::Empirical{fitnet::read_fitness_samples(file)};
}

struct TheoryFlags {
  std::string fitness = "trunc-exp";
  double lambda = kLambda;
  double eta_max = kEtaMax;
  double c = kTheoryC;
  std::string fitness_file;
  std::vector<double> grid;  // c_lo c_hi n
  std::string out;
};

int cmd_theory(const TheoryFlags& f) {
  const auto dist = make_fitness(f.fitness, f.lambda, f.eta_max, f.fitness_file);
  fitnet::validate(dist);
  const json config{{"fitness", f.fitness}, {"lambda", f.lambda}, {"eta_max", f.eta_max},
                    {"c", f.c},            {"fitness_file", f.fitness_file}, {"grid", f.grid}};
  std::ostringstream text;
  text.precision(12);
  if (f.grid.empty()) {
    text << fitnet::solve_theory(f.c, dist).describe();
  } else {
    if (f.grid.size() != 3 || f.grid[2] < 2 || !(f.grid[0] < f.grid[1]))
      throw fitnet::ParameterError("--grid expects C_LO C_HI N with C_LO < C_HI and N >= 2");
    const auto n = static_cast<int>(f.grid[2]);
    text << "c,A,ln_pole_gap,beta_max,gamma_pred\n";
    for (int i = 0; i < n; ++i) {
      const double c = f.grid[0] + (f.grid[1] - f.grid[0]) * i / (n - 1);
      const auto t = fitnet::solve_theory(c, dist);
      text << c << ',' << t.A << ',' << t.log_pole_gap << ',' << t.beta_max << ',' << t.gamma_pred << '\n';
    }
  }
  std::cout << text.str();
  if (!f.out.empty()) {
    auto o = open_out(f.out);
    o << text.str();
    write_manifest(f.out + ".manifest.json", "theory", config, json{{"report", f.out}});
  }
  return 0;
}

// ---------------------------------------------------------------- winners

struct WinnersFlags {
  double k_tg = kKtg;
  double T = kT;
  double lambda = kLambda;
  double beta_max = kBetaMax;
  double gamma_init = kGammaInit;
  std::string in;
  std::string out;
  std::string curve;
  bool raw_histogram = false;
  FitOptions fit;
};

std::string describe(const fitnet::WinnersReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "k_tg = " << r.k_tg << "\nT = " << r.T << "\nk_cut = " << r.k_cut << "\nW = " << r.W << "\nTW = " << r.TW
     << "\nEL = " << r.EL << "\nr_tw = " << r.r_tw << '\n';
  return os.str();
}

// Theory prediction from the data: exponent law fitted to measurable
// growth exponents, initial degree law fitted (or histogrammed) from k* at
// the first snapshot.
std::optional<fitnet::WinnersReport> predicted_winners(const Analysis& a, double k_tg, double T, bool raw,
                                                       const FitOptions& o, std::ostream& notes) {
  std::string err;
  const auto ef = try_exponential(a.good, o, err);
  if (!ef) {
    notes << "prediction = unavailable (" << err << ")\n";
    return std::nullopt;
  }
  std::vector<std::uint32_t> k0;
  for (const auto& [id, k] : initial_degrees(a.acc))
    if (k >= 1 && k < k_tg) k0.push_back(k);
  if (k0.empty()) {
    notes << "prediction = unavailable (no initial degrees in [1, k_tg))\n";
    return std::nullopt;
  }
  std::function<double(double)> density;
  std::vector<double> breaks{k_tg / std::pow(T, ef->beta_max)};
  bool use_raw = raw;
  if (!raw) {
    try {
      fitnet::PowerLawFitOptions po;
      po.k_min = 1;
      po.min_tail = 2;
      const double g = fitnet::fit_power_law(k0, po).gamma;
      density = fitnet::power_law_density(g);
      notes << "initial_degree_gamma = " << g << '\n';
    } catch (const fitnet::Error& e) {
      notes << "initial_degree_fit = unavailable (" << e.what() << "), using histogram\n";
      use_raw = true;
    }
  }
  if (use_raw) {
    auto hist = std::make_shared<std::vector<double>>(static_cast<std::size_t>(std::ceil(k_tg)) + 2, 0.0);
    for (auto k : k0) (*hist)[k] += 1.0;
    density = [hist](double k) {
      const auto i = static_cast<std::size_t>(std::floor(k + 0.5));
      return i < hist->size() ? (*hist)[i] : 0.0;
    };
    for (std::size_t i = 1; i + 1 < hist->size(); ++i) breaks.push_back(static_cast<double>(i) + 0.5);
  }
  notes << "exponent_lambda = " << ef->lambda << "\nexponent_beta_max = " << ef->beta_max << '\n';
  return fitnet::WinnersModel(k_tg, T, fitnet::truncated_exponential_ccdf(ef->lambda, ef->beta_max), density, breaks)
      .solve();
}

int cmd_winners(const WinnersFlags& f) {
  std::ostringstream text;
  text.precision(10);
  json config{{"k_tg", f.k_tg}, {"T", f.T}};
  if (f.in.empty()) {
    config.update(json{{"lambda", f.lambda}, {"beta_max", f.beta_max}, {"gamma_init", f.gamma_init}});
    text << describe(fitnet::winners(f.k_tg, f.T, f.lambda, f.beta_max, f.gamma_init));
  } else {
    config.update(json{{"in", f.in}, {"raw_histogram", f.raw_histogram}, {"options", f.fit.to_json()}});
    const Analysis a = analyse(f.in, f.fit);
    fitnet::EmpiricalWinnersCurve curve;
    const auto emp = fitnet::empirical_winners(a.acc, static_cast<std::uint32_t>(a.series.size()), f.k_tg, &curve);
    text << "# empirical\n" << describe(emp) << "population = " << emp.population << "\nwinners = " << emp.winners
         << "\ntalented_winners = " << emp.talented_winners << "\nexperienced_losers = " << emp.experienced_losers
         << '\n';
    std::ostringstream notes;
    notes.precision(10);
    const auto pred = predicted_winners(a, f.k_tg, static_cast<double>(a.series.size()), f.raw_histogram, f.fit, notes);
    text << "# prediction\n" << notes.str();
    if (pred) text << describe(*pred);
    if (!f.curve.empty()) {
      auto c = open_out(f.curve);
      c << "k_cut\ttalented_winners\texperienced_losers\n";
      for (std::size_t i = 0; i < curve.k_cut.size(); ++i)
        c << curve.k_cut[i] << '\t' << curve.tw[i] << '\t' << curve.el[i] << '\n';
    }
  }
  std::cout << text.str();
  if (!f.out.empty()) {
    auto o = open_out(f.out);
    o << text.str();
    write_manifest(f.out + ".manifest.json", "winners", config, json{{"report", f.out}, {"curve", f.curve}});
  }
  return 0;
}

// ---------------------------------------------------------------- rank

struct RankFlags {
  std::string in;
  std::optional<double> alpha;
  std::string source = "beta";
  std::optional<double> A;
  std::optional<double> c;
  std::optional<double> eta_floor;
  std::optional<std::uint32_t> snapshot;
  double damping = 0.85;
  std::string out;
  FitOptions fit;
};

int cmd_rank(const RankFlags& f) {
  const Analysis a = analyse(f.in, f.fit);
  const auto ordinal = f.snapshot.value_or(static_cast<std::uint32_t>(a.series.size()));
  const auto snap = a.series.load(ordinal);
  fitnet::PageRankOptions pr;
  pr.damping = f.damping;
  const auto base = fitnet::base_scores(*snap, pr);

  std::optional<std::pair<double, double>> A_c;
  double c_used = 0.0;
  if (f.source == "eta") {
    if (!f.A) throw fitnet::ParameterError("--fitness-source eta requires --A");
    c_used = f.c.value_or(fitnet::turnover(a.series).c_estimate);
    if (!(c_used >= 0.0 && c_used < 1.0)) throw fitnet::ParameterError("turnover estimate outside [0, 1)");
    A_c = std::make_pair(*f.A, c_used);
  }
  const auto fitness = fitnet::fitness_estimates(a.fits, A_c);
  const auto table = fitnet::boost(base, fitness, *f.alpha, f.eta_floor);

  const fs::path out = f.out.empty() ? fs::path(f.in) / "rank.csv" : fs::path(f.out);
  auto o = open_out(out);
  o << "id,base,fitness,boosted,rank_base,rank_boosted\n";
  for (const auto& r : table.rows)
    o << csv_field(a.series.label(r.id)) << ',' << r.base << ',' << r.fitness << ',' << r.boosted << ','
      << r.rank_base << ',' << r.rank_boosted << '\n';
  if (!o) throw fitnet::IoError("cannot write " + out.string());
  std::cout << "nodes = " << table.rows.size() << "\nsnapshot = " << ordinal << "\nalpha = " << *f.alpha
            << "\neta_floor = " << table.eta_floor << "\nmissing_fitness = " << table.missing_fitness
            << "\noutput = " << out.string() << '\n';
  json config{{"in", f.in},       {"alpha", *f.alpha},   {"fitness_source", f.source}, {"snapshot", ordinal},
              {"damping", f.damping}, {"eta_floor", table.eta_floor}, {"options", f.fit.to_json()}};
  if (A_c) config.update(json{{"A", A_c->first}, {"c", A_c->second}});
  write_manifest(out.string() + ".manifest.json", "rank", config, json{{"ranks", out.string()}});
  return 0;
}

// ---------------------------------------------------------------- report

struct ReportFlags {
  std::string in;
  std::string out;
  double k_tg = kKtg;
  double lambda = kLambda;
  double beta_max = kBetaMax;
  double gamma_init = kGammaInit;
  std::optional<std::uint32_t> cohort;
  bool gnuplot = false;
  FitOptions fit;
};

template <typename Rows>
void write_curve(const fs::path& path, const std::string& x, const std::string& y, const Rows& rows) {
  auto o = open_out(path);
  o << "# " << x << '\t' << y << '\n';
  for (const auto& [a, b] : rows) o << a << '\t' << b << '\n';
  if (!o) throw fitnet::IoError("cannot write " + path.string());
}

int cmd_report(const ReportFlags& f) {
  const fs::path out = f.out.empty() ? fs::path(f.in) / "report" : fs::path(f.out);
  const Analysis a = analyse(f.in, f.fit);
  const auto n = static_cast<std::uint32_t>(a.series.size());
  const double T = static_cast<double>(n);
  std::ostringstream rep;
  rep.precision(8);
  std::vector<std::string> files;
  auto curve = [&](const std::string& name, const std::string& x, const std::string& y, const auto& rows) {
    write_curve(out / name, x, y, rows);
    files.push_back(name);
  };
  using Rows = std::vector<std::pair<double, double>>;

  // 1: talented winners and experienced losers against the cutoff
  fitnet::EmpiricalWinnersCurve wc;
  const auto emp = fitnet::empirical_winners(a.acc, n, f.k_tg, &wc);
  Rows tw;
  Rows el;
  for (std::size_t i = 0; i < wc.k_cut.size(); ++i) {
    tw.emplace_back(wc.k_cut[i], static_cast<double>(wc.tw[i]));
    el.emplace_back(wc.k_cut[i], static_cast<double>(wc.el[i]));
  }
  curve("fig1_talented_winners.tsv", "k_cut", "count", tw);
  curve("fig1_experienced_losers.tsv", "k_cut", "count", el);
  {
    const double kink = f.k_tg / std::pow(T, f.beta_max);
    const fitnet::WinnersModel model(f.k_tg, T, fitnet::truncated_exponential_ccdf(f.lambda, f.beta_max),
                                     fitnet::power_law_density(f.gamma_init), {kink});
    Rows ttw;
    Rows tel;
    for (int i = 0; i <= 60; ++i) {
      const double k = std::pow(f.k_tg, i / 60.0);
      ttw.emplace_back(k, model.TW(k));
      tel.emplace_back(k, model.EL(k));
    }
    curve("fig1_theory_talented_winners.tsv", "k_cut", "fraction", ttw);
    curve("fig1_theory_experienced_losers.tsv", "k_cut", "fraction", tel);
    rep << "winners_population = " << emp.population << "\nwinners = " << emp.winners
        << "\nwinners_r_tw = " << emp.r_tw << "\nwinners_k_cut = " << emp.k_cut
        << "\ntheory_r_tw = " << model.solve().r_tw << '\n';
  }

  // 2: exponent distribution and its exponential fit
  const auto betas = positive_betas(a.good);
  std::string err;
  const auto ef = try_exponential(a.good, f.fit, err);
  rep << "measurable = " << a.good.size() << "\nnonzero_growth_fraction = " << fitnet::nonzero_growth_fraction(a.fits)
      << '\n';
  if (ef) {
    const std::size_t bins = 50;
    const double w = ef->beta_max / bins;
    std::vector<double> count(bins, 0.0);
    for (double b : betas)
      if (b <= ef->beta_max) count[std::min(bins - 1, static_cast<std::size_t>(b / w))] += 1.0;
    Rows dens;
    Rows fit;
    const double norm = ef->lambda / -std::expm1(-ef->lambda * ef->beta_max);
    for (std::size_t i = 0; i < bins; ++i) {
      const double x = (static_cast<double>(i) + 0.5) * w;
      if (count[i] > 0) dens.emplace_back(x, count[i] / (static_cast<double>(betas.size()) * w));
      fit.emplace_back(x, norm * std::exp(-ef->lambda * x));
    }
    curve("fig2_beta_density.tsv", "beta", "density", dens);
    curve("fig2_beta_fit.tsv", "beta", "density", fit);
    rep << "exponent_lambda = " << ef->lambda << "\nexponent_beta_max = " << ef->beta_max
        << "\nexponent_r_squared = " << ef->goodness << '\n';
  } else {
    rep << "exponent_fit = unavailable (" << err << ")\n";
  }

  // 3: mean exponent against initial degree
  const auto prof = fitnet::fitness_vs_experience(a.good, initial_degrees(a.acc));
  Rows exp_rows;
  for (const auto& b : prof.bins) exp_rows.emplace_back(std::sqrt(b.k_lo * b.k_hi), b.mean_beta);
  curve("fig3_experience.tsv", "initial_degree", "mean_beta", exp_rows);
  if (auto s = fitnet::experience_decay_slope(prof)) rep << "experience_decay_slope = " << *s << '\n';

  // 4: same-age cohort at the last snapshot
  const std::uint32_t b = f.cohort.value_or(std::max<std::uint32_t>(2, (n + 1) / 2));
  if (b >= 2 && b < n) {
    auto degrees = fitnet::cohort(a.series, b, n);
    std::sort(degrees.begin(), degrees.end());
    Rows ccdf;
    for (std::size_t i = 0; i < degrees.size(); ++i)
      if (degrees[i] > 0 && (i == 0 || degrees[i] != degrees[i - 1]))
        ccdf.emplace_back(degrees[i], static_cast<double>(degrees.size() - i) / static_cast<double>(degrees.size()));
    curve("fig4_cohort_ccdf.tsv", "k", "ccdf", ccdf);
    rep << "cohort_birth = " << b << "\ncohort_size = " << degrees.size() << '\n';
    try {
      fitnet::PowerLawFitOptions po;
      po.k_min = 1;
      po.min_tail = std::min<std::size_t>(f.fit.min_tail, 50);
      po.select_k_min = true;
      const auto pl = fitnet::fit_power_law(degrees, po);
      rep << "cohort_gamma = " << pl.gamma << "\ncohort_k_min = " << pl.k_min << '\n';
      Rows line;
      const auto above = static_cast<double>(
          degrees.end() - std::lower_bound(degrees.begin(), degrees.end(), static_cast<std::uint32_t>(pl.k_min)));
      const double scale = above / static_cast<double>(degrees.size());
      for (int i = 0; i <= 40 && !degrees.empty(); ++i) {
        const double k = static_cast<double>(pl.k_min) * std::pow(static_cast<double>(degrees.back()) / pl.k_min, i / 40.0);
        line.emplace_back(k, scale * std::pow(k / pl.k_min, 1.0 - pl.gamma));
      }
      curve("fig4_cohort_fit.tsv", "k", "ccdf", line);
      const double t_b = a.timestamps[b - 1];
      const double age = t_b > 0 ? a.timestamps[n - 1] / t_b : static_cast<double>(n) / b;
      if (ef && age > 1.0) rep << "cohort_gamma_predicted = " << fitnet::same_age_gamma(ef->lambda, age) << '\n';
    } catch (const fitnet::Error& e) {
      rep << "cohort_fit = unavailable (" << e.what() << ")\n";
    }
  }

  // 5: in-degree distribution per snapshot
  for (std::uint32_t t = 1; t <= n; ++t) {
    std::map<std::uint32_t, double> hist;
    const auto deg = fitnet::in_degrees(*a.series.load(t));
    for (const auto& [id, k] : deg)
      if (k > 0) hist[k] += 1.0;
    Rows rows;
    for (const auto& [k, cnt] : hist) rows.emplace_back(k, cnt / static_cast<double>(deg.size()));
    char name[48];
    std::snprintf(name, sizeof name, "fig5_degree_%04u.tsv", t);
    curve(name, "k", "fraction", rows);
  }

  if (f.gnuplot) {
    auto g = open_out(out / "plot.gp");
    g << "set terminal pngcairo size 800,600\nset key top right\n";
    g << "set output 'fig1.png'\nset logscale x\nplot 'fig1_talented_winners.tsv' w l t 'TW', "
         "'fig1_experienced_losers.tsv' w l t 'EL'\nunset logscale\n";
    g << "set output 'fig2.png'\nset logscale y\nplot 'fig2_beta_density.tsv' w p t 'measured', 'fig2_beta_fit.tsv' "
         "w l t 'fit'\nunset logscale\n";
    g << "set output 'fig3.png'\nset logscale xy\nplot 'fig3_experience.tsv' w lp t 'mean beta'\n";
    g << "set output 'fig4.png'\nplot 'fig4_cohort_ccdf.tsv' w p t 'cohort', 'fig4_cohort_fit.tsv' w l t 'fit'\n";
    g << "set output 'fig5.png'\nplot for [f in system('ls fig5_degree_*.tsv')] f w p t f\n";
    files.push_back("plot.gp");
  }
  auto r = open_out(out / "report.txt");
  r << rep.str();
  files.push_back("report.txt");
  std::cout << rep.str() << "output = " << out.string() << '\n';
  write_manifest(out / "manifest.json", "report",
                 json{{"in", f.in},
                      {"k_tg", f.k_tg},
                      {"lambda", f.lambda},
                      {"beta_max", f.beta_max},
                      {"gamma_init", f.gamma_init},
                      {"cohort", b},
                      {"options", f.fit.to_json()}},
                 files);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fitness-driven network growth: simulation, estimation and theory"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimFlags sim;
  auto* s = app.add_subcommand("simulate", "Run the growth-and-deletion process and write snapshots");
  s->add_option("--config", sim.config, "key = value config file or an earlier manifest.json");
  s->add_option("--out", sim.out, "Output directory")->required();
  for (const char* key : {"m", "c", "fitness", "lambda", "eta_max", "steps", "snapshot_interval", "seed", "kernel",
                          "kernel_offset", "fitness_file"}) {
    std::string flag = std::string("--") + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    s->add_option_function<std::string>(flag, [&sim, k = std::string(key)](const std::string& v) { sim.overrides[k] = v; },
                                        std::string("Override config key ") + key);
  }

  fs::path est_in;
  fs::path est_out;
  fs::path est_report;
  FitOptions est_fit;
  auto* e = app.add_subcommand("estimate", "Fit growth exponents to a snapshot directory");
  e->add_option("--in", est_in, "Snapshot directory")->required();
  e->add_option("--out", est_out, "Fit table (default <in>/fits.csv)");
  e->add_option("--report", est_report, "Summary report path");
  add_fit_flags(e, est_fit);

  TheoryFlags th;
  auto* t = app.add_subcommand("theory", "Solve the mean-field constants for a fitness law");
  t->add_option("--fitness", th.fitness, "delta, trunc-exp, uniform or empirical")
      ->check(CLI::IsMember({"delta", "trunc-exp", "uniform", "empirical"}));
  t->add_option("--lambda", th.lambda, "Truncated-exponential rate");
  t->add_option("--eta-max", th.eta_max, "Largest fitness (or the Delta value)");
  t->add_option("--c", th.c, "Turnover rate")->check(CLI::Range(0.0, 0.999999999));
  t->add_option("--fitness-file", th.fitness_file, "Samples for the empirical law");
  t->add_option("--grid", th.grid, "Sweep c: C_LO C_HI N, emitted as CSV")->expected(3);
  t->add_option("--out", th.out, "Also write the report here");

  WinnersFlags wf;
  auto* w = app.add_subcommand("winners", "Talented-winner analysis, from theory or from a snapshot directory");
  w->add_option("--ktg", wf.k_tg, "Target accumulated degree");
  w->add_option("--T", wf.T, "Observation window in snapshot units");
  w->add_option("--lambda", wf.lambda, "Exponent law rate");
  w->add_option("--beta-max", wf.beta_max, "Exponent law support");
  w->add_option("--gamma-init", wf.gamma_init, "Initial degree exponent");
  w->add_option("--in", wf.in, "Snapshot directory: empirical counts plus a prediction from fitted laws");
  w->add_flag("--raw-histogram", wf.raw_histogram, "Use the raw initial-degree histogram in the prediction");
  w->add_option("--curve", wf.curve, "Write TW/EL counts against the cutoff");
  w->add_option("--out", wf.out, "Also write the report here");
  add_fit_flags(w, wf.fit);

  RankFlags rf;
  auto* r = app.add_subcommand("rank", "Link-analysis scores boosted by estimated fitness");
  r->add_option("--in", rf.in, "Snapshot directory")->required();
  r->add_option("--alpha", rf.alpha, "Boost exponent (no default)")->required()->check(CLI::NonNegativeNumber);
  r->add_option("--fitness-source", rf.source, "beta (fitted exponent) or eta (needs --A)")
      ->check(CLI::IsMember({"beta", "eta"}));
  r->add_option("--A", rf.A, "Normalisation constant for eta estimates");
  r->add_option("--c", rf.c, "Turnover rate for eta estimates (default: measured)");
  r->add_option("--eta-floor", rf.eta_floor, "Floor for missing or tiny estimates")->check(CLI::PositiveNumber);
  r->add_option("--snapshot", rf.snapshot, "Ordinal of the ranked snapshot (default: last)");
  r->add_option("--damping", rf.damping, "Damping factor")->check(CLI::Range(0.0, 0.999999));
  r->add_option("--out", rf.out, "Rank table (default <in>/rank.csv)");
  add_fit_flags(r, rf.fit);

  ReportFlags rp;
  auto* p = app.add_subcommand("report", "Write plot-ready data for the five figure analogues");
  p->add_option("--in", rp.in, "Snapshot directory")->required();
  p->add_option("--out", rp.out, "Output directory (default <in>/report)");
  p->add_option("--ktg", rp.k_tg, "Winners target degree");
  p->add_option("--lambda", rp.lambda, "Theory curve exponent rate");
  p->add_option("--beta-max", rp.beta_max, "Theory curve exponent support");
  p->add_option("--gamma-init", rp.gamma_init, "Theory curve initial degree exponent");
  p->add_option("--cohort", rp.cohort, "Birth ordinal of the same-age cohort");
  p->add_flag("--gnuplot", rp.gnuplot, "Also write plot.gp");
  add_fit_flags(p, rp.fit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*e) return cmd_estimate(est_in, est_out, est_report, est_fit);
    if (*t) return cmd_theory(th);
    if (*w) return cmd_winners(wf);
    if (*r) return cmd_rank(rf);
    if (*p) return cmd_report(rp);
  } catch (const fitnet::Error& err) {
    std::cerr << "fitnet: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "fitnet: unexpected error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
