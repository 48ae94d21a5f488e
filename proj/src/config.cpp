#include "nce/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nce/rng.hpp"

namespace nce {

namespace {

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Value {
  std::string text;
  int line;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("line " + std::to_string(line) + ": " + what, line);
  }

  double number() const {
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || errno == ERANGE) fail("expected a number, got '" + text + "'");
    return v;
  }

  std::size_t count() const {
    const double v = number();
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      fail("expected a non-negative integer, got '" + text + "'");
    }
    return static_cast<std::size_t>(v);
  }

  bool boolean() const {
    if (text == "true") return true;
    if (text == "false") return false;
    fail("expected true or false, got '" + text + "'");
  }

  std::optional<double> auto_or_number() const {
    if (text == "auto") return std::nullopt;
    return number();
  }

  std::optional<double> none_or_number() const {
    if (text == "none") return std::nullopt;
    return number();
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const std::string& item : split_list(text)) out.push_back(Value{item, line}.number());
    if (out.empty()) fail("expected a comma-separated list of numbers");
    return out;
  }

  std::vector<std::string> words() const {
    auto out = split_list(text);
    if (out.empty()) fail("expected a comma-separated list");
    return out;
  }
};

using Handler = void (*)(ExperimentConfig&, const Value&);

const std::map<std::string, std::map<std::string, Handler>>& grammar() {
  static const std::map<std::string, std::map<std::string, Handler>> g = {
      {"family",
       {
           {"kind",
            [](ExperimentConfig& c, const Value& v) {
              if (v.text == "gaussian_mean_1d") c.family = FamilyKind::GaussianMean1D;
              else if (v.text == "diag_gaussian") c.family = FamilyKind::DiagGaussian;
              else v.fail("unknown family kind '" + v.text + "' (expected gaussian_mean_1d or diag_gaussian)");
            }},
           {"dim",
            [](ExperimentConfig& c, const Value& v) {
              const std::size_t d = v.count();
              if (d == 0 || d > 4096) v.fail("dim must be in [1, 4096]");
              c.dim = static_cast<int>(d);
            }},
           {"theta_star", [](ExperimentConfig& c, const Value& v) { c.theta_star = v.number(); }},
           {"theta_q", [](ExperimentConfig& c, const Value& v) { c.theta_q = v.number(); }},
           {"mean_star", [](ExperimentConfig& c, const Value& v) { c.mean_star = v.numbers(); }},
           {"mean_q", [](ExperimentConfig& c, const Value& v) { c.mean_q = v.numbers(); }},
           {"var_q", [](ExperimentConfig& c, const Value& v) { c.var_q = v.numbers(); }},
           {"var_star", [](ExperimentConfig& c, const Value& v) { c.var_star = v.numbers(); }},
           {"var_star_low", [](ExperimentConfig& c, const Value& v) { c.var_star_low = v.number(); }},
           {"var_star_high", [](ExperimentConfig& c, const Value& v) { c.var_star_high = v.number(); }},
           {"radii", [](ExperimentConfig& c, const Value& v) { c.radii = v.numbers(); }},
           {"allow_equal", [](ExperimentConfig& c, const Value& v) { c.allow_equal = v.boolean(); }},
       }},
      {"objective",
       {
           {"losses",
            [](ExperimentConfig& c, const Value& v) {
              c.losses.clear();
              for (const std::string& w : v.words()) {
                try {
                  c.losses.push_back(loss_kind_from_string(w));
                } catch (const std::exception& e) {
                  v.fail(e.what());
                }
              }
            }},
           {"backend",
            [](ExperimentConfig& c, const Value& v) {
              if (v.text == "quadrature") c.backend = BackendKind::Quadrature;
              else if (v.text == "monte_carlo") c.backend = BackendKind::MonteCarlo;
              else if (v.text == "closed_form") c.backend = BackendKind::ClosedForm;
              else if (v.text == "batch") c.backend = BackendKind::Batch;
              else v.fail("unknown backend '" + v.text + "' (expected quadrature, monte_carlo, closed_form or batch)");
            }},
           {"mc_samples", [](ExperimentConfig& c, const Value& v) { c.mc_samples = v.count(); }},
           {"batch_size", [](ExperimentConfig& c, const Value& v) { c.batch_size = v.count(); }},
           {"grad_norm_cap", [](ExperimentConfig& c, const Value& v) { c.grad_norm_cap = v.none_or_number(); }},
           {"log_ratio_cap",
            [](ExperimentConfig& c, const Value& v) {
              c.log_ratio_cap_auto = v.text == "auto";
              c.log_ratio_cap = c.log_ratio_cap_auto ? std::nullopt : v.none_or_number();
            }},
       }},
      {"optimizer",
       {
           {"algos",
            [](ExperimentConfig& c, const Value& v) {
              c.algos.clear();
              for (const std::string& w : v.words()) {
                try {
                  c.algos.push_back(algorithm_from_string(w));
                } catch (const std::exception& e) {
                  v.fail(e.what());
                }
              }
            }},
           {"eta_gd", [](ExperimentConfig& c, const Value& v) { c.eta_gd = v.auto_or_number(); }},
           {"eta_ngd", [](ExperimentConfig& c, const Value& v) { c.eta_ngd = v.auto_or_number(); }},
           {"eta_newton", [](ExperimentConfig& c, const Value& v) { c.eta_newton = v.auto_or_number(); }},
           {"delta", [](ExperimentConfig& c, const Value& v) { c.delta = v.auto_or_number(); }},
           {"budget", [](ExperimentConfig& c, const Value& v) { c.budget = v.count(); }},
           {"grad_tol", [](ExperimentConfig& c, const Value& v) { c.grad_tol = v.number(); }},
       }},
      {"run",
       {
           {"runs", [](ExperimentConfig& c, const Value& v) { c.runs = v.count(); }},
           {"seed",
            [](ExperimentConfig& c, const Value& v) {
              const char* begin = v.text.c_str();
              char* end = nullptr;
              errno = 0;
              const unsigned long long s = std::strtoull(begin, &end, 10);
              if (end == begin || *end != '\0' || errno == ERANGE || v.text[0] == '-') {
                v.fail("seed must be a non-negative integer");
              }
              c.seed = s;
            }},
           {"annulus_points", [](ExperimentConfig& c, const Value& v) { c.annulus_points = v.count(); }},
           {"neighborhood_samples", [](ExperimentConfig& c, const Value& v) { c.neighborhood_samples = v.count(); }},
           {"ngd_certificate", [](ExperimentConfig& c, const Value& v) { c.ngd_certificate = v.boolean(); }},
           {"bound_scale", [](ExperimentConfig& c, const Value& v) { c.bound_scale = v.number(); }},
       }},
      {"output",
       {
           {"dir", [](ExperimentConfig& c, const Value& v) { c.output_dir = v.text; }},
           {"prefix", [](ExperimentConfig& c, const Value& v) { c.prefix = v.text; }},
           {"plot", [](ExperimentConfig& c, const Value& v) { c.plot = v.boolean(); }},
       }},
  };
  return g;
}

std::vector<double> broadcast(const std::vector<double>& v, int d, double fallback) {
  if (v.empty()) return std::vector<double>(static_cast<std::size_t>(d), fallback);
  if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(d), v[0]);
  return v;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration:\n  " + join(problems, "\n  ")), problems_(std::move(problems)) {}

std::string to_string(BackendKind b) {
  switch (b) {
    case BackendKind::Quadrature: return "quadrature";
    case BackendKind::MonteCarlo: return "monte_carlo";
    case BackendKind::ClosedForm: return "closed_form";
    case BackendKind::Batch: return "batch";
  }
  return "?";
}

ClipPolicy ExperimentConfig::clip_for(LossKind kind) const {
  ClipPolicy p;
  p.grad_norm_cap = grad_norm_cap;
  p.log_ratio_cap = log_ratio_cap_auto ? ClipPolicy::defaults_for(kind).log_ratio_cap : log_ratio_cap;
  return p;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  std::set<std::string> sections_seen;
  std::set<std::pair<std::string, std::string>> keys_seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find_first_of("#;");
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("line " + std::to_string(line) + ": unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!grammar().count(section)) {
        throw ParseError("line " + std::to_string(line) + ": unknown section [" + section + "]", line);
      }
      if (!sections_seen.insert(section).second) {
        throw ParseError("line " + std::to_string(line) + ": duplicate section [" + section + "]", line);
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(line) + ": expected key = value", line);
    if (section.empty()) throw ParseError("line " + std::to_string(line) + ": key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto& keys = grammar().at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) {
      throw ParseError("line " + std::to_string(line) + ": unknown key '" + key + "' in [" + section + "]", line);
    }
    if (!keys_seen.insert({section, key}).second) {
      throw ParseError("line " + std::to_string(line) + ": duplicate key '" + key + "'", line);
    }
    if (value.empty()) throw ParseError("line " + std::to_string(line) + ": empty value for '" + key + "'", line);
    it->second(c, Value{value, line});
  }
  if (!sections_seen.count("family")) throw ParseError("missing [family] section", 0);
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& path_or_preset) {
  std::ifstream f(path_or_preset);
  if (!f) {
    if (const Preset* p = find_preset(path_or_preset)) return parse_config_text(p->text, p->name);
    throw std::runtime_error("cannot open config '" + path_or_preset + "' (not a file or shipped preset)");
  }
  std::stringstream ss;
  ss << f.rdbuf();
  std::string stem = path_or_preset;
  if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (const auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
  try {
    return parse_config_text(ss.str(), stem);
  } catch (const ParseError& e) {
    throw ParseError(path_or_preset + ": " + e.what(), e.line());
  }
}

void validate(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  const bool diag = c.family == FamilyKind::DiagGaussian;
  if (c.budget < 1) bad.push_back("[optimizer] budget must be at least 1");
  if (c.runs < 1) bad.push_back("[run] runs must be at least 1");
  if (c.losses.empty()) bad.push_back("[objective] losses must not be empty");
  if (c.algos.empty()) bad.push_back("[optimizer] algos must not be empty");
  if (!diag && c.dim != 1) bad.push_back("[family] gaussian_mean_1d has dim = 1");
  if (!std::isfinite(c.theta_star) || !std::isfinite(c.theta_q)) bad.push_back("[family] theta values must be finite");
  if (!diag && c.theta_star == c.theta_q && !c.allow_equal) {
    bad.push_back("[family] theta_star equals theta_q (set allow_equal = true to permit)");
  }
  if (diag) {
    for (const auto* v : {&c.mean_star, &c.mean_q, &c.var_q, &c.var_star}) {
      if (v->size() > 1 && static_cast<int>(v->size()) != c.dim) {
        bad.push_back("[family] list lengths must be 1 or dim");
        break;
      }
    }
    for (double v : c.var_q) if (!(v > 0.0)) bad.push_back("[family] var_q entries must be positive");
    for (double v : c.var_star) if (!(v > 0.0)) bad.push_back("[family] var_star entries must be positive");
    if (c.var_star.empty() && !(c.var_star_low > 0.0 && c.var_star_low <= c.var_star_high)) {
      bad.push_back("[family] need 0 < var_star_low <= var_star_high");
    }
  }
  for (double r : c.radii) if (!(r >= 0.0) || !std::isfinite(r)) bad.push_back("[family] radii must be finite and >= 0");
  if (c.backend == BackendKind::Quadrature && diag && c.dim != 1) {
    bad.push_back("[objective] quadrature backend needs a one-dimensional sample space");
  }
  if (c.backend == BackendKind::ClosedForm) {
    for (LossKind k : c.losses) {
      if (k == LossKind::NCE) {
        bad.push_back("[objective] closed_form backend supports only the ence loss");
        break;
      }
    }
  }
  if (c.mc_samples < 1) bad.push_back("[objective] mc_samples must be positive");
  if (c.batch_size < 1) bad.push_back("[objective] batch_size must be positive");
  if (c.grad_norm_cap && !(*c.grad_norm_cap > 0.0)) bad.push_back("[objective] grad_norm_cap must be positive");
  if (c.log_ratio_cap && !(*c.log_ratio_cap > 0.0)) bad.push_back("[objective] log_ratio_cap must be positive");
  for (const auto* e : {&c.eta_gd, &c.eta_ngd, &c.eta_newton, &c.delta}) {
    if (*e && !(**e > 0.0 && std::isfinite(**e))) {
      bad.push_back("[optimizer] step sizes and delta must be positive");
      break;
    }
  }
  if (!(c.grad_tol >= 0.0)) bad.push_back("[optimizer] grad_tol must be >= 0");
  if (!(c.bound_scale > 0.0)) bad.push_back("[run] bound_scale must be positive");
  if (c.output_dir.empty()) bad.push_back("[output] dir must not be empty");
  if (!bad.empty()) throw ValidationError(bad);
}

Family config_family(const ExperimentConfig& c) {
  return c.family == FamilyKind::GaussianMean1D ? Family::gaussian_mean_1d() : Family::diag_gaussian(c.dim);
}

namespace {

TauParam diag_tau(const ExperimentConfig& c, const std::vector<double>& mean, const std::vector<double>& var) {
  const Family fam = config_family(c);
  Vector params(2 * c.dim);
  for (int i = 0; i < c.dim; ++i) {
    params(i) = mean[static_cast<std::size_t>(i)];
    params(c.dim + i) = var[static_cast<std::size_t>(i)];
  }
  return tau_of_theta(fam, params);
}

}  // namespace

TauParam config_tau_star(const ExperimentConfig& c) {
  const Family fam = config_family(c);
  if (c.family == FamilyKind::GaussianMean1D) return tau_of_theta(fam, Vector::Constant(1, c.theta_star));
  std::vector<double> var = c.var_star;
  if (var.empty()) {
    Rng rng(mix_seed({c.seed, 0x5ca1e5ULL}));
    for (int i = 0; i < c.dim; ++i) var.push_back(c.var_star_low + (c.var_star_high - c.var_star_low) * rng.uniform());
  }
  return diag_tau(c, broadcast(c.mean_star, c.dim, 0.0), broadcast(var, c.dim, 1.0));
}

TauParam config_tau_q(const ExperimentConfig& c) {
  const Family fam = config_family(c);
  if (c.family == FamilyKind::GaussianMean1D) return tau_of_theta(fam, Vector::Constant(1, c.theta_q));
  return diag_tau(c, broadcast(c.mean_q, c.dim, 0.0), broadcast(c.var_q, c.dim, 1.0));
}

}  // namespace nce
