#include "ambc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ambc/errors.hpp"

namespace ambc {

const char* to_string(SweepAxis axis) { return axis == SweepAxis::snr ? "snr" : "pilots"; }

const char* to_string(Method method) {
  switch (method) {
    case Method::ls: return "ls";
    case Method::mmse: return "mmse";
    case Method::crld: return "crld";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "ls") return Method::ls;
  if (name == "mmse") return Method::mmse;
  if (name == "crld") return Method::crld;
  throw ParameterError("unknown method '" + name + "' (expected ls, mmse, or crld)");
}

void ExperimentPlan::validate() const {
  if (values.empty()) throw ParameterError("sweep axis values must not be empty");
  if (methods.empty()) throw ParameterError("at least one method is required");
  if (links.empty()) throw ParameterError("at least one link is required");
  if (trials < 100) throw ParameterError("trials must be at least 100");
  if (axis == SweepAxis::pilots)
    for (double v : values)
      if (v < 1 || v != std::floor(v)) throw ParameterError("pilot sweep values must be positive integers");
}

namespace {

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

double to_double(const std::string& key, int line, const std::string& v) {
  if (v == "inf" || v == "+inf") return INFINITY;
  if (v == "-inf") return -INFINITY;
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || std::isnan(out))
    throw ParseError(key, line, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, int line, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ParseError(key, line, "expected an integer, got '" + v + "'");
  return out;
}

Index positive(const std::string& key, int line, const std::string& v, long long min = 1) {
  const long long n = to_int(key, line, v);
  if (n < min) throw ParseError(key, line, "must be at least " + std::to_string(min));
  return static_cast<Index>(n);
}

bool to_bool(const std::string& key, int line, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(key, line, "expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  if (v == INFINITY) return "inf";
  if (v == -INFINITY) return "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::string(f(xs[i]));
  return out;
}

using Setter = std::function<void(AppConfig&, const std::string& key, int line, const std::string& value)>;

template <typename F>
auto wrap_domain(F&& f) {
  return [f = std::forward<F>(f)](AppConfig& c, const std::string& key, int line, const std::string& v) {
    try {
      f(c, key, line, v);
    } catch (const ParameterError& e) {
      throw ParseError(key, line, e.what());
    }
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto add = [&](const char* name, auto fn) { t.emplace(name, wrap_domain(fn)); };
    using K = const std::string&;
    // System model.
    add("m", [](AppConfig& c, K k, int l, K v) { c.system.m = positive(k, l, v); });
    add("ma", [](AppConfig& c, K k, int l, K v) { c.system.ma = positive(k, l, v); });
    add("mb", [](AppConfig& c, K k, int l, K v) { c.system.mb = positive(k, l, v); });
    add("snr_db", [](AppConfig& c, K k, int l, K v) {
      c.system.snr_db = to_double(k, l, v);
      if (c.system.snr_db == -INFINITY) throw ParseError(k, l, "must be finite or +inf");
    });
    add("zeta_db", [](AppConfig& c, K k, int l, K v) {
      c.system.zeta_db = to_double(k, l, v);
      if (c.system.zeta_db == INFINITY) throw ParseError(k, l, "must be finite or -inf");
    });
    add("f", [](AppConfig& c, K k, int l, K v) {
      c.system.f = to_double(k, l, v);
      if (!std::isfinite(c.system.f)) throw ParseError(k, l, "must be finite");
    });
    add("corr_model", [](AppConfig& c, K, int, K v) {
      c.system.corr_h.model = c.system.corr_g.model = correlation_model_from_string(v);
    });
    add("rho", [](AppConfig& c, K k, int l, K v) {
      const double rho = to_double(k, l, v);
      if (!(rho >= 0.0 && rho < 1.0)) throw ParseError(k, l, "must lie in [0, 1)");
      c.system.corr_h.rho = c.system.corr_g.rho = rho;
    });
    add("na", [](AppConfig& c, K k, int l, K v) { c.system.na = positive(k, l, v); });
    add("nb", [](AppConfig& c, K k, int l, K v) { c.system.nb = positive(k, l, v); });
    add("nc", [](AppConfig& c, K k, int l, K v) { c.system.nc = positive(k, l, v, 0); });
    add("frames", [](AppConfig& c, K k, int l, K v) { c.system.frames = positive(k, l, v); });
    add("seed", [](AppConfig& c, K k, int l, K v) {
      c.system.seed = static_cast<std::uint64_t>(positive(k, l, v, 0));
    });
    // Experiment plan.
    add("sweep", [](AppConfig& c, K k, int l, K v) {
      if (v == "snr") c.plan.axis = SweepAxis::snr;
      else if (v == "pilots") c.plan.axis = SweepAxis::pilots;
      else throw ParseError(k, l, "expected snr or pilots, got '" + v + "'");
    });
    add("axis_values", [](AppConfig& c, K k, int l, K v) {
      c.plan.values.clear();
      for (const auto& s : split_list(v)) c.plan.values.push_back(to_double(k, l, s));
      if (c.plan.values.empty()) throw ParseError(k, l, "must list at least one value");
    });
    add("methods", [](AppConfig& c, K k, int l, K v) {
      c.plan.methods.clear();
      for (const auto& s : split_list(v)) c.plan.methods.push_back(method_from_string(s));
      if (c.plan.methods.empty()) throw ParseError(k, l, "must list at least one method");
    });
    add("links", [](AppConfig& c, K k, int l, K v) {
      c.plan.links.clear();
      for (const auto& s : split_list(v)) c.plan.links.push_back(link_from_string(s));
      if (c.plan.links.empty()) throw ParseError(k, l, "must list at least one link");
    });
    add("trials", [](AppConfig& c, K k, int l, K v) { c.plan.trials = positive(k, l, v, 100); });
    add("out", [](AppConfig& c, K, int, K v) { c.plan.out = v; });
    // Training.
    add("train_examples", [](AppConfig& c, K k, int l, K v) { c.train_examples = positive(k, l, v, 2); });
    add("batch_size", [](AppConfig& c, K k, int l, K v) { c.train.batch_size = positive(k, l, v); });
    add("max_epochs", [](AppConfig& c, K k, int l, K v) { c.train.max_epochs = positive(k, l, v, 0); });
    add("patience", [](AppConfig& c, K k, int l, K v) { c.train.patience = positive(k, l, v); });
    add("val_fraction", [](AppConfig& c, K k, int l, K v) {
      c.train.val_fraction = to_double(k, l, v);
      if (!(c.train.val_fraction > 0.0 && c.train.val_fraction < 1.0)) throw ParseError(k, l, "must lie in (0, 1)");
    });
    add("optimizer", [](AppConfig& c, K, int, K v) { c.train.optimizer.kind = nn::optimizer_kind_from_string(v); });
    add("lr", [](AppConfig& c, K k, int l, K v) {
      c.train.optimizer.learning_rate = to_double(k, l, v);
      if (!(c.train.optimizer.learning_rate > 0.0 && std::isfinite(c.train.optimizer.learning_rate)))
        throw ParseError(k, l, "must be positive");
    });
    add("lr_decay", [](AppConfig& c, K k, int l, K v) {
      c.train.lr_decay = to_double(k, l, v);
      if (!(c.train.lr_decay > 0.0 && c.train.lr_decay <= 1.0)) throw ParseError(k, l, "must lie in (0, 1]");
    });
    add("momentum", [](AppConfig& c, K k, int l, K v) {
      c.train.optimizer.momentum = to_double(k, l, v);
      if (!(c.train.optimizer.momentum >= 0.0 && c.train.optimizer.momentum < 1.0))
        throw ParseError(k, l, "must lie in [0, 1)");
    });
    add("strict", [](AppConfig& c, K k, int l, K v) { c.train.strict_determinism = to_bool(k, l, v); });
    add("train_seed", [](AppConfig& c, K k, int l, K v) {
      c.train.seed = static_cast<std::uint64_t>(positive(k, l, v, 0));
    });
    add("mixed_snr", [](AppConfig& c, K k, int l, K v) { c.mixed.enabled = to_bool(k, l, v); });
    add("mixed_snr_min", [](AppConfig& c, K k, int l, K v) { c.mixed.min_db = to_double(k, l, v); });
    add("mixed_snr_max", [](AppConfig& c, K k, int l, K v) { c.mixed.max_db = to_double(k, l, v); });
    // Model.
    add("blocks", [](AppConfig& c, K k, int l, K v) { c.hyper.blocks = positive(k, l, v); });
    add("layers", [](AppConfig& c, K k, int l, K v) { c.hyper.layers = positive(k, l, v, 2); });
    add("filters", [](AppConfig& c, K k, int l, K v) { c.hyper.filters = positive(k, l, v); });
    add("kernel", [](AppConfig& c, K k, int l, K v) {
      c.hyper.kernel = positive(k, l, v);
      if (c.hyper.kernel % 2 == 0) throw ParseError(k, l, "must be odd");
    });
    add("recon", [](AppConfig& c, K, int, K v) { c.hyper.recon = recon_kind_from_string(v); });
    add("checkpoint_dir", [](AppConfig& c, K, int, K v) { c.checkpoint_dir = v; });
    add("threads", [](AppConfig& c, K k, int l, K v) { c.threads = positive(k, l, v); });
    return t;
  }();
  return table;
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
  AppConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("", line, "expected key=value, got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("", line, "missing key before '='");
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParseError(key, line, "unknown key");
    if (value.empty()) throw ParseError(key, line, "missing value");
    if (const auto prev = seen.find(key); prev != seen.end())
      throw ParseError(key, line, "duplicate key (first set on line " + std::to_string(prev->second) + ")");
    seen.emplace(key, line);
    it->second(cfg, key, line, value);
  }
  cfg.system.corr_h.dim = cfg.system.corr_g.dim = cfg.system.m;
  auto line_of = [&](const char* key) {
    const auto it = seen.find(key);
    return it == seen.end() ? 0 : it->second;
  };
  if (cfg.system.ma * cfg.system.mb != cfg.system.m)
    throw ParseError("ma", line_of("ma"), "ma * mb must equal m");
  if (cfg.mixed.min_db > cfg.mixed.max_db)
    throw ParseError("mixed_snr_min", line_of("mixed_snr_min"), "must not exceed mixed_snr_max");
  try {
    validate(cfg.system);
    cfg.plan.validate();
  } catch (const ParameterError& e) {
    throw ParseError("", 0, e.what());
  }
  cfg.hyper.ma = cfg.system.ma;
  cfg.hyper.mb = cfg.system.mb;
  cfg.hyper.p = cfg.system.na;
  return cfg;
}

AppConfig parse_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("", 0, "cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string dump_config(const AppConfig& c) {
  std::ostringstream os;
  const SystemConfig& s = c.system;
  os << "# system model\n";
  os << "m=" << s.m << "\nma=" << s.ma << "\nmb=" << s.mb << '\n';
  os << "snr_db=" << fmt(s.snr_db) << "\nzeta_db=" << fmt(s.zeta_db) << "\nf=" << fmt(s.f) << '\n';
  os << "corr_model=" << to_string(s.corr_h.model) << "\nrho=" << fmt(s.corr_h.rho) << '\n';
  os << "na=" << s.na << "\nnb=" << s.nb << "\nnc=" << s.nc << "\nframes=" << s.frames << "\nseed=" << s.seed << '\n';
  os << "# experiment plan\n";
  os << "sweep=" << to_string(c.plan.axis) << '\n';
  os << "axis_values=" << join(c.plan.values, [](double v) { return fmt(v); }) << '\n';
  os << "methods=" << join(c.plan.methods, [](Method m) { return to_string(m); }) << '\n';
  os << "links=" << join(c.plan.links, [](Link l) { return to_string(l); }) << '\n';
  os << "trials=" << c.plan.trials << "\nout=" << c.plan.out << '\n';
  os << "# training\n";
  os << "train_examples=" << c.train_examples << "\nbatch_size=" << c.train.batch_size << '\n';
  os << "max_epochs=" << c.train.max_epochs << "\npatience=" << c.train.patience << '\n';
  os << "val_fraction=" << fmt(c.train.val_fraction) << '\n';
  os << "optimizer=" << nn::to_string(c.train.optimizer.kind) << "\nlr=" << fmt(c.train.optimizer.learning_rate) << '\n';
  os << "lr_decay=" << fmt(c.train.lr_decay) << "\nmomentum=" << fmt(c.train.optimizer.momentum) << '\n';
  os << "strict=" << (c.train.strict_determinism ? "true" : "false") << "\ntrain_seed=" << c.train.seed << '\n';
  os << "mixed_snr=" << (c.mixed.enabled ? "true" : "false") << "\nmixed_snr_min=" << fmt(c.mixed.min_db)
     << "\nmixed_snr_max=" << fmt(c.mixed.max_db) << '\n';
  os << "# model\n";
  os << "blocks=" << c.hyper.blocks << "\nlayers=" << c.hyper.layers << "\nfilters=" << c.hyper.filters << '\n';
  os << "kernel=" << c.hyper.kernel << "\nrecon=" << to_string(c.hyper.recon) << '\n';
  os << "checkpoint_dir=" << c.checkpoint_dir << "\nthreads=" << c.threads << '\n';
  return os.str();
}

std::string config_help() {
  return "Configuration file keys (key=value, '#' comments). Defaults:\n" + dump_config(AppConfig{}) +
         "\nsnr_db accepts inf (noiseless); zeta_db accepts -inf (no reflection).\n";
}

}  // namespace ambc
