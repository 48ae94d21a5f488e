#include "nce/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "nce/rng.hpp"

namespace nce {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string clean_status(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '"') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << content;
  f.flush();
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

// Population quantities used for step-size policies: quadrature on 1-d
// sample spaces, Monte Carlo otherwise.
Objective reference_objective(const ExperimentConfig& c, LossKind kind) {
  const Family fam = config_family(c);
  Backend b = QuadratureBackend{};
  if (fam.dim() != 1) b = MonteCarloBackend{std::max<std::size_t>(c.mc_samples, 100'000), c.seed};
  return Objective(kind, fam, config_tau_star(c), config_tau_q(c), b);
}

Objective cell_objective(const ExperimentConfig& c, LossKind kind, std::uint64_t cell_seed) {
  switch (c.backend) {
    case BackendKind::Quadrature:
      return Objective(kind, config_family(c), config_tau_star(c), config_tau_q(c), QuadratureBackend{});
    case BackendKind::MonteCarlo:
      return Objective(kind, config_family(c), config_tau_star(c), config_tau_q(c),
                       MonteCarloBackend{c.mc_samples, cell_seed});
    case BackendKind::ClosedForm:
      return Objective(kind, config_family(c), config_tau_star(c), config_tau_q(c), ClosedFormBackend{});
    case BackendKind::Batch:
      break;
  }
  return reference_objective(c, kind);
}

std::vector<Vector> theta_segment(const Objective& obj, std::size_t n) {
  return segment_points(obj.tau_q().theta, obj.tau_star().theta, n);
}

StepSizeInfo choose_step_size(const ExperimentConfig& c, LossKind kind, Algorithm algo) {
  StepSizeInfo info{to_string(kind), to_string(algo), 0.0, "config"};
  const std::optional<double>& fixed =
      algo == Algorithm::GD ? c.eta_gd : (algo == Algorithm::NGD ? c.eta_ngd : c.eta_newton);
  if (fixed) {
    info.eta = *fixed;
    return info;
  }
  const Objective ref = reference_objective(c, kind);
  StepConstants k;
  if (algo == Algorithm::GD) {
    k.sigma_max_global = hessian_extremes(ref, ref.tau_q()).sigma_max;
    info.source = "auto: 1/sigma_max(H(tau_q))";
  } else if (algo == Algorithm::Newton) {
    const Vector a = ref.tau_q().stacked(), b = ref.tau_star().stacked();
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const Vector& p : segment_points(a, b, 17)) {
      const HessianExtremes h = hessian_extremes(ref, TauParam::from_stacked(p));
      lo = std::min(lo, h.sigma_min);
      hi = std::max(hi, h.sigma_max);
    }
    k.sigma_min_global = lo;
    k.sigma_max_global = hi;
    info.source = "auto: sigma_min/sigma_max over the tau_q -> tau* segment";
  } else {
    const double d = (ref.tau_q().stacked() - ref.tau_star().stacked()).norm();
    k.delta = c.delta ? *c.delta : 0.05 * d;
    const auto thetas = theta_segment(ref, 33);
    const FamilyBounds fb = measure_bounds(ref.family(), thetas);
    const std::size_t n = ref.family().dim() == 1 ? c.neighborhood_samples : std::min<std::size_t>(c.neighborhood_samples, 8);
    const NeighborhoodConstants nc = neighborhood_constants(ref, fb, n, mix_seed({c.seed, 7}));
    k.beta_u = nc.beta_u;
    k.beta_l = nc.beta_l;
    k.kappa_star = condition_number_at_optimum(ref);
    info.source = "auto: sqrt(beta_l/(beta_u kappa*)) delta, delta = " + num(*k.delta, 6);
  }
  info.eta = default_step_size(algo, k);
  return info;
}

void append_trace(ResultTable& t, const std::string& loss, const std::string& algo, std::size_t run,
                  const Trace& trace, const std::string& status) {
  for (const TraceRecord& r : trace.records) {
    t.rows.push_back({loss, algo, run, r.step, r.loss, r.grad_norm, r.dist, r.min_dist, status});
  }
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& c) {
  validate(c);
  ResultTable table;
  for (LossKind kind : c.losses) {
    const std::string loss = to_string(kind);
    for (Algorithm algo : c.algos) {
      const std::string algo_name = to_string(algo);
      std::optional<StepSizeInfo> eta;
      std::string eta_error;
      try {
        eta = choose_step_size(c, kind, algo);
        table.step_sizes.push_back(*eta);
      } catch (const std::exception& e) {
        eta_error = clean_status(std::string("error: step size: ") + e.what());
        table.step_sizes.push_back({loss, algo_name, kNaN, eta_error});
      }

      std::optional<Batch> held_out;
      double best_loss = std::numeric_limits<double>::infinity();
      for (std::size_t run = 0; run < c.runs; ++run) {
        const std::uint64_t cell_seed = c.seed ^ static_cast<std::uint64_t>(run);
        if (!eta) {
          table.rows.push_back({loss, algo_name, run, 0, kNaN, kNaN, kNaN, kNaN, eta_error});
          continue;
        }
        AlgoConfig ac;
        ac.algo = algo;
        ac.eta = eta->eta;
        ac.max_steps = c.budget;
        ac.grad_tol = c.grad_tol;
        try {
          const Objective obj = cell_objective(c, kind, cell_seed);
          const Oracle oracle = c.backend == BackendKind::Batch
                                    ? batch_oracle(obj, c.batch_size, cell_seed, c.clip_for(kind))
                                    : population_oracle(obj);
          const Trace trace = nce::run(oracle, ac, obj.tau_q().stacked(), obj.tau_star().stacked());
          append_trace(table, loss, algo_name, run, trace, "ok");

          if (!held_out) held_out = draw_batch(obj, 2048, c.seed + 1'000'000);
          const TauParam last = TauParam::from_stacked(trace.records.back().tau);
          const double l = empirical_loss(obj, last, *held_out, c.clip_for(kind));
          if (l < best_loss) {
            best_loss = l;
            table.best_run[{loss, algo_name}] = run;
          }
        } catch (const RunError& e) {
          const std::string status = clean_status(std::string("error: ") + e.what());
          if (e.partial_trace().records.empty()) {
            table.rows.push_back({loss, algo_name, run, 0, kNaN, kNaN, kNaN, kNaN, status});
          } else {
            append_trace(table, loss, algo_name, run, e.partial_trace(), status);
          }
        } catch (const std::exception& e) {
          table.rows.push_back(
              {loss, algo_name, run, 0, kNaN, kNaN, kNaN, kNaN, clean_status(std::string("error: ") + e.what())});
        }
      }
    }
  }
  return table;
}

void write_csv(const ResultTable& table, const std::string& path) {
  std::string out = "loss,algo,run,step,loss_value,grad_norm,dist,min_dist,status\n";
  for (const ResultRow& r : table.rows) {
    out += r.loss + ',' + r.algo + ',' + std::to_string(r.run) + ',' + std::to_string(r.step) + ',' +
           num(r.loss_value) + ',' + num(r.grad_norm) + ',' + num(r.dist) + ',' + num(r.min_dist) + ',' +
           clean_status(r.status) + '\n';
  }
  write_file(path, out);
}

ResultTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "loss,algo,run,step,loss_value,grad_norm,dist,min_dist,status") {
    throw std::runtime_error(path + ": unexpected CSV header");
  }
  ResultTable t;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected 9 fields");
    auto real = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') {
        throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": bad number '" + s + "'");
      }
      return v;
    };
    t.rows.push_back({fields[0], fields[1], static_cast<std::size_t>(std::stoull(fields[2])),
                      static_cast<std::size_t>(std::stoull(fields[3])), real(fields[4]), real(fields[5]),
                      real(fields[6]), real(fields[7]), fields[8]});
  }
  return t;
}

std::vector<std::string> emit_plot_data(const ResultTable& table, const std::string& stem) {
  if (table.rows.empty()) throw std::runtime_error("emit_plot_data: empty table");
  // (loss, algo) in first-seen order -> run -> rows
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::map<std::size_t, std::vector<const ResultRow*>>> groups;
  for (const ResultRow& r : table.rows) {
    const auto key = std::make_pair(r.loss, r.algo);
    if (!groups.count(key)) keys.push_back(key);
    groups[key][r.run].push_back(&r);
  }

  std::vector<std::string> written;
  for (const auto& key : keys) {
    const auto& runs = groups.at(key);
    std::size_t last_step = 0;
    for (const auto& [run, rows] : runs) last_step = std::max(last_step, rows.back()->step);

    std::size_t best = runs.begin()->first;
    if (const auto it = table.best_run.find(key); it != table.best_run.end()) {
      best = it->second;
    } else {
      double lowest = std::numeric_limits<double>::infinity();
      for (const auto& [run, rows] : runs) {
        if (rows.back()->loss_value < lowest) {
          lowest = rows.back()->loss_value;
          best = run;
        }
      }
    }

    // Value of each run at `step`, carrying its last record forward.
    auto value_at = [](const std::vector<const ResultRow*>& rows, std::size_t step, bool log_loss) {
      const ResultRow* pick = rows.front();
      for (const ResultRow* r : rows) {
        if (r->step > step) break;
        pick = r;
      }
      return log_loss ? std::log10(pick->loss_value) : pick->min_dist;
    };

    for (bool log_loss : {false, true}) {
      const std::string path = stem + "_" + key.first + "_" + key.second + (log_loss ? "_log10loss" : "") + ".dat";
      std::string out = std::string("# ") + key.first + " " + key.second + ", " + std::to_string(runs.size()) +
                        " runs, best run " + std::to_string(best) + "\n";
      out += log_loss ? "# step mean_log10_loss std_log10_loss best_log10_loss\n"
                      : "# step mean_min_dist std_min_dist best_min_dist\n";
      std::vector<std::size_t> steps;
      for (const auto& [run, rows] : runs) {
        for (const ResultRow* r : rows) steps.push_back(r->step);
      }
      std::sort(steps.begin(), steps.end());
      steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
      for (std::size_t step : steps) {
        double sum = 0.0, sq = 0.0;
        for (const auto& [run, rows] : runs) sum += value_at(rows, step, log_loss);
        const double n = static_cast<double>(runs.size());
        const double mean = sum / n;
        for (const auto& [run, rows] : runs) {
          const double d = value_at(rows, step, log_loss) - mean;
          sq += d * d;
        }
        const double sd = runs.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
        const double b = runs.count(best) ? value_at(runs.at(best), step, log_loss) : kNaN;
        out += std::to_string(step) + " " + num(mean) + " " + num(sd) + " " + num(b) + "\n";
      }
      write_file(path, out);
      written.push_back(path);
    }
  }
  return written;
}

std::string summarize(const ExperimentConfig& c, const ResultTable& table) {
  std::ostringstream os;
  os << "# experiment " << c.name << "\n";
  os << "# family " << config_family(c).name() << ", backend " << to_string(c.backend);
  if (c.backend == BackendKind::Batch) os << " (batch " << c.batch_size << " per side, fresh each step)";
  os << ", budget " << c.budget << ", runs " << c.runs << ", seed " << c.seed << "\n";
  os << "# step sizes (auto policies: GD 1/sigma_max(H(tau_q)); Newton sigma_min/sigma_max over the segment;"
        " NGD sqrt(beta_l/(beta_u kappa*)) delta with delta = 0.05 |tau0 - tau*| unless set)\n";
  for (const StepSizeInfo& s : table.step_sizes) {
    os << "eta " << s.loss << " " << s.algo << " = " << num(s.eta, 10) << "  [" << s.source << "]\n";
  }
  std::map<std::pair<std::string, std::string>, std::map<std::size_t, const ResultRow*>> last;
  std::vector<std::pair<std::string, std::string>> keys;
  for (const ResultRow& r : table.rows) {
    const auto key = std::make_pair(r.loss, r.algo);
    if (!last.count(key)) keys.push_back(key);
    last[key][r.run] = &r;
  }
  for (const auto& key : keys) {
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& [run, row] : last.at(key)) {
      if (row->status == "ok") {
        sum += row->min_dist;
        ++ok;
      }
    }
    os << "final " << key.first << " " << key.second << ": mean min_dist " << (ok ? num(sum / ok, 10) : "nan")
       << " over " << ok << "/" << last.at(key).size() << " completed runs";
    if (const auto it = table.best_run.find(key); it != table.best_run.end()) os << ", best run " << it->second;
    os << "\n";
    for (const auto& [run, row] : last.at(key)) {
      if (row->status != "ok") os << "  run " << run << ": " << row->status << "\n";
    }
  }
  return os.str();
}

std::string output_dir(const ExperimentConfig& c) {
  if (const char* env = std::getenv("NCE_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return c.output_dir;
}

namespace {

std::string prepare_stem(const ExperimentConfig& c) {
  const std::filesystem::path dir = output_dir(c);
  std::filesystem::create_directories(dir);
  return (dir / c.file_prefix()).string();
}

}  // namespace

int run_command(const ExperimentConfig& c, std::ostream& log) {
  const ResultTable table = run_experiment(c);
  const std::string stem = prepare_stem(c);
  write_csv(table, stem + ".csv");
  log << "wrote " << stem << ".csv (" << table.rows.size() << " rows)\n";
  if (c.plot) {
    for (const std::string& p : emit_plot_data(table, stem)) log << "wrote " << p << "\n";
  }
  const std::string summary = summarize(c, table);
  write_file(stem + "_summary.txt", summary);
  log << summary;
  return 0;
}

CertifySetup certify_setup(const ExperimentConfig& c) {
  CertifySetup s;
  s.family = config_family(c);
  s.radii = c.radii.empty() ? std::vector<double>{std::abs(c.theta_star - c.theta_q)} : c.radii;
  s.kinds = c.losses;
  s.seed = c.seed;
  s.annulus_points = c.annulus_points;
  s.neighborhood_samples = c.neighborhood_samples;
  s.ngd_certificate = c.ngd_certificate;
  s.bound_scale = c.bound_scale;
  return s;
}

int verify_command(const ExperimentConfig& c, std::ostream& log) {
  const LandscapeReport report = certify(certify_setup(c));
  const std::string stem = prepare_stem(c);
  std::ostringstream text;
  text << "# verify " << c.name << ": " << report.count(Verdict::Pass) << " pass, " << report.count(Verdict::Fail)
       << " fail, " << report.count(Verdict::Skip) << " skip, " << report.count(Verdict::Inconclusive)
       << " inconclusive\n";
  text << report.to_text();
  write_file(stem + "_verify.txt", text.str());
  write_file(stem + "_verify.csv", report.to_csv());
  log << text.str();
  log << "wrote " << stem << "_verify.txt and " << stem << "_verify.csv\n";
  if (report.inconclusive()) return 2;
  return report.all_passed() ? 0 : 1;
}

int landscape_command(const ExperimentConfig& c, std::ostream& log) {
  const std::string stem = prepare_stem(c);
  for (LossKind kind : c.losses) {
    const Objective obj = reference_objective(c, kind);
    const std::size_t points = obj.family().dim() == 1 ? 101 : 21;
    const Vector a = obj.tau_q().stacked(), b = obj.tau_star().stacked();
    std::ostringstream os;
    os << "# " << to_string(kind) << " along tau_q -> tau*, " << obj.family().name() << "\n";
    os << "# t dist loss grad_norm projected_grad sigma_min sigma_max\n";
    const auto pts = segment_points(a, b, points);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(points - 1);
      const TauParam tau = TauParam::from_stacked(pts[i]);
      const double loss = population_loss(obj, tau);
      const double gn = population_gradient(obj, tau).norm();
      const double pg = projected_gradient(obj, pts[i]);
      const HessianExtremes h = hessian_extremes(obj, tau);
      os << num(t) << " " << num((pts[i] - b).norm()) << " " << num(loss) << " " << num(gn) << " " << num(pg) << " "
         << num(h.sigma_min) << " " << num(h.sigma_max) << "\n";
    }
    const std::string path = stem + "_landscape_" + to_string(kind) + ".dat";
    write_file(path, os.str());
    log << "wrote " << path << "\n";
  }
  return 0;
}

}  // namespace nce
