#include "stackgda/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace stackgda::harness {

namespace fs = std::filesystem;
using fisher::UtilityClass;

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::vector<UtilityClass>& all_classes() {
  static const std::vector<UtilityClass> order = {
      UtilityClass::Linear, UtilityClass::CobbDouglas, UtilityClass::Leontief};
  return order;
}

}  // namespace

// The tuned rate pairs (3, 0.1) and (3, 1) attach as (allocation, price): only
// that attachment produces converging dynamics at these market scales.
std::map<UtilityClass, ClassParams> ExperimentConfig::default_params() {
  return {
      {UtilityClass::Linear, ClassParams{1000, 0.1, 3.0, 1e-3}},
      {UtilityClass::CobbDouglas, ClassParams{500, 1.0, 3.0, 0.0}},
      {UtilityClass::Leontief, ClassParams{500, 1.0, 3.0, 1e-3}},
  };
}

void ExperimentConfig::validate() const {
  if (classes.empty()) throw DomainError("config: no utility classes selected");
  if (num_markets < 1) throw DomainError("config: num_markets must be >= 1");
  if (num_buyers < 1 || num_goods < 1) throw DomainError("config: buyers and goods must be >= 1");
  auto check_range = [](std::pair<double, double> r, const char* name) {
    if (r.first <= 0.0 || r.second < r.first) {
      throw DomainError(std::string("config: invalid range for ") + name);
    }
  };
  check_range(budget_range, "budget_range");
  check_range(valuation_range, "valuation_range");
  check_range(price_init_range, "price_init_range");
  for (UtilityClass cls : classes) {
    auto it = params.find(cls);
    if (it == params.end()) {
      throw DomainError("config: missing parameters for class " + fisher::to_string(cls));
    }
    const ClassParams& p = it->second;
    if (p.horizon < 1) throw DomainError("config: horizon must be >= 1");
    if (p.eta_price <= 0.0 || p.eta_alloc <= 0.0) {
      throw DomainError("config: learning rates must be positive");
    }
    if (p.delta < 0.0) throw DomainError("config: delta must be >= 0");
  }
  if (exploit_stride < 1) throw DomainError("config: exploit_stride must be >= 1");
  if (oracle_iterations < 1) throw DomainError("config: oracle_iterations must be >= 1");
  if (parallelism < 0) throw DomainError("config: parallelism must be >= 0");
}

std::string ExperimentConfig::identity_json() const {
  auto j = nlohmann::ordered_json::parse(to_json());
  j.erase("parallelism");
  j.erase("output_dir");
  return j.dump(2);
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  if (classes == all_classes()) {
    j["utility_class"] = "all";
  } else {
    std::vector<std::string> names;
    for (UtilityClass c : classes) names.push_back(fisher::to_string(c));
    if (names.size() == 1) {
      j["utility_class"] = names.front();
    } else {
      j["utility_class"] = names;
    }
  }
  j["num_markets"] = num_markets;
  j["num_buyers"] = num_buyers;
  j["num_goods"] = num_goods;
  nlohmann::ordered_json cp;
  for (UtilityClass c : all_classes()) {
    auto it = params.find(c);
    if (it == params.end()) continue;
    cp[fisher::to_string(c)] = {{"horizon", it->second.horizon},
                                {"eta_price", it->second.eta_price},
                                {"eta_alloc", it->second.eta_alloc},
                                {"delta", it->second.delta}};
  }
  j["classes"] = cp;
  j["budget_range"] = {budget_range.first, budget_range.second};
  j["valuation_range"] = {valuation_range.first, valuation_range.second};
  j["price_init_range"] = {price_init_range.first, price_init_range.second};
  j["master_seed"] = master_seed;
  j["parallelism"] = parallelism;
  j["output_dir"] = output_dir;
  j["projection"] = projection == IntersectionMode::Dykstra ? "dykstra" : "pocs";
  j["lagged_constraint"] = lagged_constraint;
  j["exploit_stride"] = exploit_stride;
  j["oracle_iterations"] = oracle_iterations;
  j["oracle_tol"] = oracle_tol;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("utility_class")) {
    const auto& uc = j.at("utility_class");
    cfg.classes.clear();
    if (uc.is_string()) {
      const auto s = uc.get<std::string>();
      if (s == "all") {
        cfg.classes = all_classes();
      } else {
        cfg.classes.push_back(fisher::utility_class_from_string(s));
      }
    } else {
      for (const auto& name : uc) {
        cfg.classes.push_back(fisher::utility_class_from_string(name.get<std::string>()));
      }
    }
  }
  cfg.num_markets = j.value("num_markets", cfg.num_markets);
  cfg.num_buyers = j.value("num_buyers", cfg.num_buyers);
  cfg.num_goods = j.value("num_goods", cfg.num_goods);
  if (j.contains("classes")) {
    for (const auto& [name, cj] : j.at("classes").items()) {
      UtilityClass cls = fisher::utility_class_from_string(name);
      ClassParams& p = cfg.params[cls];
      p.horizon = cj.value("horizon", p.horizon);
      p.eta_price = cj.value("eta_price", p.eta_price);
      p.eta_alloc = cj.value("eta_alloc", p.eta_alloc);
      p.delta = cj.value("delta", p.delta);
    }
  }
  auto read_range = [&j](const char* key, std::pair<double, double>& out) {
    if (j.contains(key)) {
      out.first = j.at(key).at(0).get<double>();
      out.second = j.at(key).at(1).get<double>();
    }
  };
  read_range("budget_range", cfg.budget_range);
  read_range("valuation_range", cfg.valuation_range);
  read_range("price_init_range", cfg.price_init_range);
  cfg.master_seed = j.value("master_seed", cfg.master_seed);
  cfg.parallelism = j.value("parallelism", cfg.parallelism);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (j.contains("projection")) {
    const auto s = j.at("projection").get<std::string>();
    if (s == "dykstra") {
      cfg.projection = IntersectionMode::Dykstra;
    } else if (s == "pocs") {
      cfg.projection = IntersectionMode::Pocs;
    } else {
      throw DomainError("config: projection must be 'dykstra' or 'pocs'");
    }
  }
  cfg.lagged_constraint = j.value("lagged_constraint", cfg.lagged_constraint);
  cfg.exploit_stride = j.value("exploit_stride", cfg.exploit_stride);
  cfg.oracle_iterations = j.value("oracle_iterations", cfg.oracle_iterations);
  cfg.oracle_tol = j.value("oracle_tol", cfg.oracle_tol);
  cfg.validate();
  return cfg;
}

namespace {

MarketRecord run_one_market(const ExperimentConfig& config, UtilityClass cls, int index) {
  const ClassParams& params = config.params.at(cls);
  const std::uint64_t market_seed = derive_seed(config.master_seed, index);

  MarketRecord rec;
  rec.cls = cls;
  rec.index = index;
  rec.seed = market_seed;
  rec.market = fisher::generate_market(market_seed, config.num_buyers, config.num_goods,
                                       config.budget_range, config.valuation_range, cls);

  fisher::MbrdConfig mbrd;
  mbrd.horizon = params.horizon;
  mbrd.eta_price = StepSchedule::constant(params.eta_price);
  mbrd.eta_alloc = StepSchedule::constant(params.eta_alloc);
  mbrd.delta = params.delta;
  mbrd.projection = config.projection;
  mbrd.lagged_constraint = config.lagged_constraint;
  mbrd.seed = derive_seed(market_seed, 2);
  mbrd.record_every = params.horizon;  // only the price-average series is needed here
  Rng price_rng(derive_seed(market_seed, 1));
  mbrd.init_prices = price_rng.uniform_vec(config.num_goods, config.price_init_range.first,
                                           config.price_init_range.second);

  const fisher::MbrdResult run = fisher::run_mbrd(rec.market, mbrd);

  fisher::EquilibriumCertificate cert;
  if (cls == UtilityClass::CobbDouglas) {
    cert = fisher::equilibrium_oracle(rec.market, fisher::EquilibriumMethod::AnalyticCobbDouglas,
                                      1e-9);
  } else {
    fisher::ReferenceDescentOptions opts;
    opts.iterations = config.oracle_iterations;
    opts.seed = derive_seed(market_seed, 3);
    opts.delta = 0.0;
    cert = fisher::equilibrium_oracle(rec.market, fisher::EquilibriumMethod::ReferenceDescent,
                                      config.oracle_tol, opts);
  }
  rec.f_star = cert.f_star;
  rec.clearing_residual = cert.clearing_residual;
  rec.certified = cert.certified;

  // The exploitability metric itself is evaluated without the delta shift.
  rec.exploitability.resize(params.horizon);
  double last = 0.0;
  for (int t = 1; t <= params.horizon; ++t) {
    if (t == 1 || t == params.horizon || t % config.exploit_stride == 0) {
      last = fisher::exploitability(rec.market, run.price_avg_series[t - 1], cert.f_star, 0.0);
    }
    rec.exploitability[t - 1] = last;
  }
  rec.final_exploitability = rec.exploitability.back();
  return rec;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  RunReport report;
  report.config = config;
  report.content_hash = fnv1a_hex(config.identity_json());

  struct Task {
    UtilityClass cls;
    int index;
  };
  std::vector<Task> tasks;
  for (UtilityClass cls : config.classes) {
    for (int k = 0; k < config.num_markets; ++k) tasks.push_back({cls, k});
  }
  std::vector<MarketRecord> records(tasks.size());
  parallel_for(tasks.size(), config.parallelism, [&](std::size_t i) {
    records[i] = run_one_market(config, tasks[i].cls, tasks[i].index);
  });

  // Reduce in fixed class/market order so serial and parallel runs agree bitwise.
  std::size_t offset = 0;
  for (UtilityClass cls : config.classes) {
    const ClassParams& params = config.params.at(cls);
    ClassSeries series;
    series.cls = cls;
    series.horizon = params.horizon;
    series.stride = config.exploit_stride;
    series.mean_exploitability.assign(params.horizon, 0.0);
    for (int k = 0; k < config.num_markets; ++k) {
      const MarketRecord& rec = records[offset + k];
      if (!rec.certified) {
        ++series.markets_excluded;
        continue;
      }
      ++series.markets_included;
      for (int t = 0; t < params.horizon; ++t) {
        series.mean_exploitability[t] += rec.exploitability[t];
      }
    }
    if (series.markets_included > 0) {
      for (double& v : series.mean_exploitability) v /= series.markets_included;
    }
    series.normalized.resize(params.horizon);
    for (int t = 1; t <= params.horizon; ++t) {
      series.normalized[t - 1] = series.mean_exploitability[t - 1] * std::sqrt(double(t));
    }
    report.series.push_back(std::move(series));
    offset += config.num_markets;
  }
  report.markets = std::move(records);

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string series_csv(const RunReport& report) {
  std::ostringstream os;
  os << "t";
  for (const auto& s : report.series) {
    const std::string name = fisher::to_string(s.cls);
    os << ",mean_exploitability_" << name << ",normalized_exploitability_" << name;
  }
  os << "\n";
  int max_t = 0;
  for (const auto& s : report.series) max_t = std::max(max_t, s.horizon);
  for (int t = 1; t <= max_t; ++t) {
    os << t;
    for (const auto& s : report.series) {
      if (t <= s.horizon) {
        os << "," << fmt_double(s.mean_exploitability[t - 1]) << ","
           << fmt_double(s.normalized[t - 1]);
      } else {
        os << ",,";
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string per_market_csv(const RunReport& report) {
  std::ostringstream os;
  os << "class,market,t,exploitability\n";
  for (const auto& rec : report.markets) {
    const std::string name = fisher::to_string(rec.cls);
    for (std::size_t t = 0; t < rec.exploitability.size(); ++t) {
      os << name << "," << rec.index << "," << (t + 1) << ","
         << fmt_double(rec.exploitability[t]) << "\n";
    }
  }
  return os.str();
}

std::string report_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(report.config.identity_json());
  j["content_hash"] = report.content_hash;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& s : report.series) {
    classes.push_back({{"class", fisher::to_string(s.cls)},
                       {"horizon", s.horizon},
                       {"stride", s.stride},
                       {"markets_included", s.markets_included},
                       {"markets_excluded", s.markets_excluded},
                       {"final_mean_exploitability", s.mean_exploitability.back()},
                       {"final_normalized_exploitability", s.normalized.back()}});
  }
  j["classes"] = classes;
  nlohmann::ordered_json markets = nlohmann::ordered_json::array();
  for (const auto& rec : report.markets) {
    markets.push_back({{"class", fisher::to_string(rec.cls)},
                       {"market", rec.index},
                       {"seed", rec.seed},
                       {"f_star", rec.f_star},
                       {"clearing_residual", rec.clearing_residual},
                       {"certified", rec.certified},
                       {"final_exploitability", rec.final_exploitability}});
  }
  j["markets"] = markets;
  return j.dump(2);
}

}  // namespace

void write_report(const RunReport& report, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "markets");
  write_text_file(fs::path(dir) / "config.json", report.config.to_json());
  for (const auto& rec : report.markets) {
    const std::string name =
        fisher::to_string(rec.cls) + "_" + std::to_string(rec.index) + ".json";
    write_text_file(fs::path(dir) / "markets" / name, rec.market.to_json());
  }
  write_text_file(fs::path(dir) / "series.csv", series_csv(report));
  write_text_file(fs::path(dir) / "per_market.csv", per_market_csv(report));
  write_text_file(fs::path(dir) / "report.json", report_json(report));
  emit_plot(report, (fs::path(dir) / "plot.svg").string());

  nlohmann::ordered_json meta;
  meta["wall_clock_seconds"] = report.wall_clock_seconds;
  meta["written_at_unix"] = static_cast<long long>(std::time(nullptr));
  write_text_file(fs::path(dir) / "meta.json", meta.dump(2));
}

void emit_plot(const RunReport& report, const std::string& path) {
  if (report.series.empty() || report.series.front().normalized.empty()) {
    throw DomainError("emit_plot: report has no series");
  }
  const double width = 860, height = 520;
  const double ml = 80, mr = 200, mt = 30, mb = 60;
  const double pw = width - ml - mr, ph = height - mt - mb;

  int max_t = 1;
  double max_y = 0.0;
  for (const auto& s : report.series) {
    max_t = std::max(max_t, s.horizon);
    for (double v : s.normalized) {
      if (std::isfinite(v)) max_y = std::max(max_y, v);
    }
  }
  if (max_y <= 0.0) max_y = 1.0;
  max_y *= 1.05;

  auto sx = [&](double t) { return ml + pw * (t - 1.0) / std::max(1.0, max_t - 1.0); };
  auto sy = [&](double v) { return mt + ph * (1.0 - v / max_y); };

  static const std::map<UtilityClass, std::string> colors = {
      {UtilityClass::Linear, "#1f77b4"},
      {UtilityClass::CobbDouglas, "#2ca02c"},
      {UtilityClass::Leontief, "#d62728"}};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
     << mt + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = 1.0 + (max_t - 1.0) * i / 5.0;
    const double v = max_y * i / 5.0;
    char tb[32], vb[32];
    std::snprintf(tb, sizeof(tb), "%.0f", t);
    std::snprintf(vb, sizeof(vb), "%.4g", v);
    os << "<text x=\"" << sx(t) << "\" y=\"" << mt + ph + 20
       << "\" font-size=\"12\" text-anchor=\"middle\">" << tb << "</text>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << sy(v) + 4
       << "\" font-size=\"12\" text-anchor=\"end\">" << vb << "</text>\n";
  }
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 15
     << "\" font-size=\"14\" text-anchor=\"middle\">t</text>\n";
  os << "<text x=\"20\" y=\"" << mt + ph / 2
     << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << mt + ph / 2
     << ")\">normalized_exploitability</text>\n";

  double legend_y = mt + 10;
  for (const auto& s : report.series) {
    const std::string& color = colors.at(s.cls);
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (int t = 1; t <= s.horizon; ++t) {
      double v = s.normalized[t - 1];
      if (!std::isfinite(v)) v = 0.0;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g ", sx(t), sy(std::min(v, max_y)));
      os << buf;
    }
    os << "\"/>\n";
    os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << ml + pw + 35
       << "\" y2=\"" << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << legend_y + 4
       << "\" font-size=\"12\">normalized_exploitability_" << fisher::to_string(s.cls)
       << "</text>\n";
    legend_y += 22;
  }
  os << "</svg>\n";
  write_text_file(path, os.str());
}

namespace {

struct Replay {
  ExampleReplayResult result;
  bool done = false;

  explicit Replay(std::string name) { result.name = std::move(name); }

  void expect(int t, double got, double want, const char* what) {
    if (done || std::abs(got - want) <= 1e-12) return;
    result.pass = false;
    result.first_divergent_t = t;
    std::ostringstream os;
    os << what << " at t=" << t << ": got " << got << ", expected " << want;
    result.detail = os.str();
    done = true;
  }

  ExampleReplayResult finish() {
    if (!done) {
      result.pass = true;
      result.first_divergent_t = -1;
      result.detail = "ok";
    }
    return result;
  }
};

Vec vec1(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

}  // namespace

std::vector<ExampleReplayResult> verify_examples(double step_scale) {
  std::vector<ExampleReplayResult> results;

  {  // Vanilla GDA loops at (0,1) and leaves the equilibrium when started there.
    Replay replay("vanilla-gda-example-1-1");
    const auto& cat = builtin_game("example-1-1");
    RunConfig cfg;
    cfg.horizon = 5;
    cfg.eta_x = cfg.eta_y = StepSchedule::constant(step_scale);
    cfg.init = {vec1(0.0), vec1(0.0), std::nullopt};
    Trajectory traj = run_vanilla_gda(cat.game, cfg);
    for (const auto& pt : traj.points) {
      if (pt.t == 0) continue;
      replay.expect(pt.t, pt.x[0], 0.0, "x");
      replay.expect(pt.t, pt.y[0], 1.0, "y");
    }
    cfg.horizon = 1;
    cfg.init = {vec1(0.5), vec1(0.5), std::nullopt};
    Trajectory one = run_vanilla_gda(cat.game, cfg);
    replay.expect(1, one.points.back().x[0], -0.5, "x from equilibrium");
    replay.expect(1, one.points.back().y[0], 0.5, "y from equilibrium");
    results.push_back(replay.finish());
  }

  {  // G2DA loops at (lambda, x, y) = (0, 0, 1).
    Replay replay("g2da-example-1-1");
    const auto& cat = builtin_game("example-1-1");
    RunConfig cfg;
    cfg.horizon = 5;
    cfg.eta_lambda = cfg.eta_x = cfg.eta_y = StepSchedule::constant(step_scale);
    cfg.init = {vec1(0.0), vec1(0.0), vec1(0.0)};
    Trajectory traj = run_g2da(cat.game, cfg);
    for (const auto& pt : traj.points) {
      if (pt.t == 0) continue;
      replay.expect(pt.t, (*pt.lambda)[0], 0.0, "lambda");
      replay.expect(pt.t, pt.x[0], 0.0, "x");
      replay.expect(pt.t, pt.y[0], 1.0, "y");
    }
    results.push_back(replay.finish());
  }

  {  // LGDA with lambda* = 0 cycles between (1,1) and (-1,-1); averages vanish.
    Replay replay("lgda-cycle");
    const auto& cat = builtin_game("lgda-cycle");
    RunConfig cfg;
    cfg.horizon = 6;
    cfg.eta_x = cfg.eta_y = StepSchedule::constant(step_scale);
    cfg.init = {vec1(1.0), vec1(1.0), std::nullopt};
    Trajectory traj = run_lgda(cat.game, vec1(0.0), cfg);
    for (const auto& pt : traj.points) {
      if (pt.t == 0) continue;
      const double want = pt.t % 2 == 1 ? -1.0 : 1.0;
      replay.expect(pt.t, pt.x[0], want, "x");
      replay.expect(pt.t, pt.y[0], want, "y");
    }
    replay.expect(cfg.horizon, traj.final_xbar[0], 0.0, "xbar");
    replay.expect(cfg.horizon, traj.final_ybar[0], 0.0, "ybar");
    results.push_back(replay.finish());
  }

  {  // LGDA with lambda* = 1 never updates y; x contracts to 1/2.
    Replay replay("lgda-degenerate");
    const auto& cat = builtin_game("degenerate");
    RunConfig cfg;
    cfg.horizon = 64;
    cfg.eta_x = cfg.eta_y = StepSchedule::constant(step_scale / 8.0);
    cfg.init = {vec1(0.0), vec1(0.0), std::nullopt};
    Trajectory traj = run_lgda(cat.game, vec1(1.0), cfg);
    for (const auto& pt : traj.points) {
      if (pt.t == 0) continue;
      replay.expect(pt.t, pt.y[0], 0.0, "y");
    }
    const double x_final = traj.points.back().x[0];
    if (std::abs(x_final - 0.5) > 1e-6) {
      replay.expect(cfg.horizon, x_final, 0.5, "x limit");
    }
    results.push_back(replay.finish());
  }

  return results;
}

int print_verify_table(const std::vector<ExampleReplayResult>& results, std::ostream& os) {
  int failures = 0;
  os << "replay                     status  first-divergence\n";
  for (const auto& r : results) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-26s %-7s ", r.name.c_str(), r.pass ? "PASS" : "FAIL");
    os << line;
    if (r.pass) {
      os << "-\n";
    } else {
      os << "t=" << r.first_divergent_t << "  (" << r.detail << ")\n";
      ++failures;
    }
  }
  return failures;
}

}  // namespace stackgda::harness
