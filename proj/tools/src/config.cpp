#include "pinn/app/config.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "pinn/conditions.hpp"
#include "pinn/dsl.hpp"

namespace pinn::app {

namespace {

std::string at(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

template <typename T>
T required(std::optional<T> v, const std::string& path) {
  if (!v) throw ConfigError(path, "missing required setting");
  return std::move(*v);
}

std::size_t count(Document& doc, const std::string& path, std::size_t fallback) {
  const auto v = take_int(doc, path);
  if (!v) return fallback;
  if (*v < 0) throw ConfigError(path, "must not be negative");
  return static_cast<std::size_t>(*v);
}

std::optional<std::size_t> optional_count(Document& doc, const std::string& path) {
  const auto v = take_int(doc, path);
  if (!v) return std::nullopt;
  if (*v < 0) throw ConfigError(path, "must not be negative");
  return static_cast<std::size_t>(*v);
}

std::optional<std::uint64_t> optional_seed(Document& doc, const std::string& path) {
  const auto v = take_int(doc, path);
  if (!v) return std::nullopt;
  if (*v < 0) throw ConfigError(path, "must not be negative");
  return static_cast<std::uint64_t>(*v);
}

domain::Side parse_side(const std::string& text, const std::string& path) {
  if (text == "lower") return domain::Side::kLower;
  if (text == "upper") return domain::Side::kUpper;
  throw ConfigError(path, "expected \"lower\" or \"upper\", found \"" + text + "\"");
}

void read_domain(Document& doc, ProblemConfig& cfg) {
  const std::size_t n = doc.array_size("domain");
  if (n == 0) throw ConfigError("domain", "at least one [[domain]] dimension is required");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string base = at("domain", i);
    DimensionConfig d;
    d.name = required(take_string(doc, base + ".name"), base + ".name");
    d.lower = required(take_double(doc, base + ".lower"), base + ".lower");
    d.upper = required(take_double(doc, base + ".upper"), base + ".upper");
    const std::string kind = take_string(doc, base + ".kind").value_or("spatial");
    if (kind == "spatial") {
      d.kind = domain::DimensionKind::kSpatial;
    } else if (kind == "temporal") {
      d.kind = domain::DimensionKind::kTemporal;
    } else {
      throw ConfigError(base + ".kind",
                        "expected \"spatial\" or \"temporal\", found \"" + kind + "\"");
    }
    cfg.domain.push_back(d);
  }
}

void read_pde(Document& doc, ProblemConfig& cfg) {
  cfg.residual = required(take_string(doc, "pde.residual"), "pde.residual");
  const std::size_t n = doc.array_size("pde.param");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string base = at("pde.param", i);
    ParamConfig p;
    p.name = required(take_string(doc, base + ".name"), base + ".name");
    p.init = required(take_double(doc, base + ".init"), base + ".init");
    p.trainable = take_bool(doc, base + ".trainable").value_or(true);
    for (const auto& other : cfg.params) {
      if (other.name == p.name) throw ConfigError(base + ".name", "duplicate parameter \"" + p.name + "\"");
    }
    cfg.params.push_back(p);
  }
}

void read_conditions(Document& doc, ProblemConfig& cfg) {
  const std::size_t n = doc.array_size("conditions");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string base = at("conditions", i);
    ConditionConfig c;
    const std::string type = required(take_string(doc, base + ".type"), base + ".type");
    if (type == "initial") {
      c.type = ConditionConfig::Type::kInitial;
      c.value = required(take_string(doc, base + ".value"), base + ".value");
    } else if (type == "dirichlet") {
      c.type = ConditionConfig::Type::kDirichlet;
      c.dim = required(take_string(doc, base + ".dim"), base + ".dim");
      c.side = parse_side(required(take_string(doc, base + ".side"), base + ".side"), base + ".side");
      auto v = doc.take(base + ".value");
      if (!v) throw ConfigError(base + ".value", "missing required setting");
      if (auto* s = std::get_if<std::string>(&v->data)) {
        c.value = *s;
      } else if (auto* d = std::get_if<double>(&v->data)) {
        c.value = *d;
      } else if (auto* k = std::get_if<std::int64_t>(&v->data)) {
        c.value = static_cast<double>(*k);
      } else {
        throw ConfigError(base + ".value", "expected a number or an expression string");
      }
    } else if (type == "periodic") {
      c.type = ConditionConfig::Type::kPeriodic;
      c.dim = required(take_string(doc, base + ".dim"), base + ".dim");
      if (auto m = take_int_array(doc, base + ".match")) {
        bool zero = false;
        bool one = false;
        for (auto o : *m) {
          if (o == 0) zero = true;
          else if (o == 1) one = true;
          else throw ConfigError(base + ".match", "orders must be 0 or 1");
        }
        if (!zero && !one) throw ConfigError(base + ".match", "must name at least one order");
        c.match.clear();
        if (zero) c.match.push_back(0);
        if (one) c.match.push_back(1);
      }
    } else {
      throw ConfigError(base + ".type", "unknown condition type \"" + type +
                                            "\" (expected initial, dirichlet or periodic)");
    }
    c.n_points = optional_count(doc, base + ".n_points");
    c.seed = optional_seed(doc, base + ".seed");
    cfg.conditions.push_back(std::move(c));
  }
}

void read_network(Document& doc, ProblemConfig& cfg) {
  const auto layers = required(take_int_array(doc, "network.layers"), "network.layers");
  for (auto w : layers) {
    if (w < 1) throw ConfigError("network.layers", "layer widths must be positive");
    cfg.layers.push_back(static_cast<std::size_t>(w));
  }
  if (cfg.layers.size() < 2) {
    throw ConfigError("network.layers", "needs at least an input and an output width");
  }
  if (cfg.layers.front() != cfg.domain.size()) {
    throw ConfigError("network.layers", "input width " + std::to_string(cfg.layers.front()) +
                                            " does not match the " +
                                            std::to_string(cfg.domain.size()) +
                                            " domain dimensions");
  }
  if (cfg.layers.back() != 1) throw ConfigError("network.layers", "output width must be 1");
  const std::string act = take_string(doc, "network.activation").value_or("tanh");
  try {
    cfg.activation = net::parse_activation(act);
  } catch (const Error& e) {
    throw ConfigError("network.activation", e.what());
  }
}

void read_training(Document& doc, ProblemConfig& cfg) {
  solver::SolverConfig& t = cfg.training;
  t.iterations = count(doc, "training.iterations", t.iterations);
  t.n_r = count(doc, "training.n_r", t.n_r);
  t.n_0 = count(doc, "training.n_0", t.n_0);
  t.n_b = count(doc, "training.n_b", t.n_b);
  t.workers = count(doc, "training.workers", t.workers);
  t.seed = optional_seed(doc, "training.seed").value_or(t.seed);
  if (t.n_r < 1) throw ConfigError("training.n_r", "must be at least 1");
  if (t.workers < 1) throw ConfigError("training.workers", "must be at least 1");

  const std::string sampling = take_string(doc, "training.sampling").value_or("lhs");
  if (sampling == "lhs") {
    t.sampling = domain::SamplingStrategy::kLatinHypercube;
  } else if (sampling == "uniform") {
    t.sampling = domain::SamplingStrategy::kUniform;
  } else {
    throw ConfigError("training.sampling", "expected \"lhs\" or \"uniform\", found \"" + sampling + "\"");
  }

  const std::string kind = take_string(doc, "training.optimizer.kind").value_or("adam");
  if (kind == "adam") {
    t.optimizer.kind = solver::OptimizerConfig::Kind::kAdam;
  } else if (kind == "sgd") {
    t.optimizer.kind = solver::OptimizerConfig::Kind::kSgd;
  } else {
    throw ConfigError("training.optimizer.kind", "expected \"adam\" or \"sgd\", found \"" + kind + "\"");
  }
  auto& adam = t.optimizer.adam;
  adam.lr = take_double(doc, "training.optimizer.lr").value_or(adam.lr);
  adam.beta1 = take_double(doc, "training.optimizer.beta1").value_or(adam.beta1);
  adam.beta2 = take_double(doc, "training.optimizer.beta2").value_or(adam.beta2);
  adam.epsilon = take_double(doc, "training.optimizer.epsilon").value_or(adam.epsilon);
  t.optimizer.param_lr = take_double(doc, "training.optimizer.param_lr");
  t.self_adaptive.enabled =
      take_bool(doc, "training.self_adaptive.enabled").value_or(t.self_adaptive.enabled);
  t.self_adaptive.lr_lambda =
      take_double(doc, "training.self_adaptive.lr_lambda").value_or(t.self_adaptive.lr_lambda);
  try {
    t.validate();
  } catch (const Error& e) {
    const std::string msg = e.what();
    const std::string path = msg.substr(0, msg.find(' '));
    throw ConfigError(path, msg.substr(msg.find(' ') + 1));
  }
}

void read_output(Document& doc, ProblemConfig& cfg, const std::filesystem::path& base_dir) {
  if (auto p = take_string(doc, "data.path")) {
    cfg.data = (base_dir / *p).lexically_normal();
  }
  cfg.output =
      (base_dir / take_string(doc, "output.directory").value_or("pinn-out")).lexically_normal();
  if (auto r = take_int_array(doc, "output.resolution")) {
    if (r->size() != cfg.domain.size()) {
      throw ConfigError("output.resolution", "needs one entry per domain dimension (" +
                                                 std::to_string(cfg.domain.size()) + ")");
    }
    for (auto k : *r) {
      if (k < 1) throw ConfigError("output.resolution", "entries must be positive");
      cfg.resolution.push_back(static_cast<std::size_t>(k));
    }
  } else {
    cfg.resolution.assign(cfg.domain.size(), kDefaultResolution);
  }
  double total = 1.0;
  for (auto k : cfg.resolution) total *= static_cast<double>(k);
  if (total > static_cast<double>(kMaxGridPoints)) {
    throw ConfigError("output.resolution", "grid has more than " +
                                               std::to_string(kMaxGridPoints) +
                                               " points; lower the resolution");
  }
}

}  // namespace

ProblemConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  Document doc = Document::parse(text);
  ProblemConfig cfg;
  read_domain(doc, cfg);
  read_pde(doc, cfg);
  read_conditions(doc, cfg);
  read_network(doc, cfg);
  read_training(doc, cfg);
  read_output(doc, cfg, base_dir);

  // Dirichlet/IC defaults are filled in so the resolved config is explicit.
  for (auto& c : cfg.conditions) {
    if (!c.n_points) {
      c.n_points = c.type == ConditionConfig::Type::kInitial ? cfg.training.n_0 : cfg.training.n_b;
    }
  }

  if (const auto left = doc.remaining(); !left.empty()) {
    throw ConfigError(left.front(), "unknown setting");
  }
  make_problem(cfg);  // resolves every expression and cross-reference
  return cfg;
}

ProblemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.has_parent_path() ? path.parent_path() : ".");
}

domain::Domain make_domain(const ProblemConfig& config) {
  domain::Domain d;
  for (std::size_t i = 0; i < config.domain.size(); ++i) {
    const auto& dim = config.domain[i];
    try {
      d.add(dim.name, dim.lower, dim.upper, dim.kind);
    } catch (const domain::DomainError& e) {
      throw ConfigError(at("domain", i), e.what());
    }
  }
  return d;
}

net::MLPSpec make_net_spec(const ProblemConfig& config) {
  net::MLPSpec spec;
  spec.input_width = config.layers.front();
  spec.hidden_layers.assign(config.layers.begin() + 1, config.layers.end() - 1);
  spec.output_width = config.layers.back();
  spec.activation = config.activation;
  return spec;
}

namespace {

conditions::ConditionFn parse_fn(const std::string& text, const domain::Domain& d,
                                 const std::string& path) {
  try {
    return conditions::ConditionFn::parse(text, d);
  } catch (const dsl::ParseError& e) {
    throw ConfigError(path, std::string(e.what()) + " (column " + std::to_string(e.column()) + ")");
  }
}

}  // namespace

solver::Problem make_problem(const ProblemConfig& config) {
  const domain::Domain d = make_domain(config);
  dsl::ParamSet params;
  std::vector<std::string> names;
  for (const auto& p : config.params) {
    params.add(p.name, p.init, p.trainable);
    names.push_back(p.name);
  }

  std::optional<dsl::ResidualExpr> residual;
  try {
    residual = dsl::parse(config.residual, d, names);
  } catch (const dsl::ParseError& e) {
    throw ConfigError("pde.residual",
                      std::string(e.what()) + " (column " + std::to_string(e.column()) + ")");
  }

  std::vector<conditions::Condition> conds;
  for (std::size_t i = 0; i < config.conditions.size(); ++i) {
    const auto& c = config.conditions[i];
    const std::string base = at("conditions", i);
    std::optional<conditions::Condition> cond;
    switch (c.type) {
      case ConditionConfig::Type::kInitial:
        cond = conditions::InitialCondition{
            parse_fn(std::get<std::string>(c.value), d, base + ".value"), c.n_points, c.seed};
        break;
      case ConditionConfig::Type::kDirichlet: {
        conditions::DirichletBC bc{c.dim, c.side, 0.0, c.n_points, c.seed};
        if (const auto* s = std::get_if<std::string>(&c.value)) {
          bc.value = parse_fn(*s, d, base + ".value");
        } else {
          bc.value = std::get<double>(c.value);
        }
        cond = std::move(bc);
        break;
      }
      case ConditionConfig::Type::kPeriodic: {
        conditions::PeriodicBC bc;
        bc.dim = c.dim;
        bc.match_value = std::find(c.match.begin(), c.match.end(), 0) != c.match.end();
        bc.match_derivative = std::find(c.match.begin(), c.match.end(), 1) != c.match.end();
        bc.n_points = c.n_points;
        bc.seed = c.seed;
        cond = std::move(bc);
        break;
      }
    }
    try {
      conditions::validate(*cond, d);
    } catch (const Error& e) {
      throw ConfigError(c.type == ConditionConfig::Type::kInitial ? base : base + ".dim", e.what());
    }
    conds.push_back(std::move(*cond));
  }

  return solver::Problem{d, std::move(*residual), std::move(params), std::move(conds),
                         std::nullopt, make_net_spec(config)};
}

namespace {

std::string num(double v) { return domain::format_double(v); }

std::string int_list(const auto& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(values[i]);
  }
  return out + "]";
}

}  // namespace

std::string emit_config(const ProblemConfig& c) {
  std::ostringstream out;
  out << "# Resolved configuration: every setting spelled out.\n";
  for (const auto& d : c.domain) {
    out << "\n[[domain]]\nname = " << quote(d.name) << "\nlower = " << num(d.lower)
        << "\nupper = " << num(d.upper) << "\nkind = " << quote(domain::kind_name(d.kind)) << '\n';
  }
  out << "\n[pde]\nresidual = " << quote(c.residual) << '\n';
  for (const auto& p : c.params) {
    out << "\n[[pde.param]]\nname = " << quote(p.name) << "\ninit = " << num(p.init)
        << "\ntrainable = " << (p.trainable ? "true" : "false") << '\n';
  }
  for (const auto& cond : c.conditions) {
    out << "\n[[conditions]]\n";
    switch (cond.type) {
      case ConditionConfig::Type::kInitial:
        out << "type = \"initial\"\nvalue = " << quote(std::get<std::string>(cond.value)) << '\n';
        break;
      case ConditionConfig::Type::kDirichlet:
        out << "type = \"dirichlet\"\ndim = " << quote(cond.dim)
            << "\nside = " << quote(domain::side_name(cond.side)) << "\nvalue = ";
        if (const auto* s = std::get_if<std::string>(&cond.value)) {
          out << quote(*s) << '\n';
        } else {
          out << num(std::get<double>(cond.value)) << '\n';
        }
        break;
      case ConditionConfig::Type::kPeriodic:
        out << "type = \"periodic\"\ndim = " << quote(cond.dim) << "\nmatch = " << int_list(cond.match)
            << '\n';
        break;
    }
    if (cond.n_points) out << "n_points = " << *cond.n_points << '\n';
    if (cond.seed) out << "seed = " << *cond.seed << '\n';
  }
  out << "\n[network]\nlayers = " << int_list(c.layers)
      << "\nactivation = " << quote(net::activation_name(c.activation)) << '\n';

  const auto& t = c.training;
  out << "\n[training]\niterations = " << t.iterations << "\nn_r = " << t.n_r
      << "\nn_0 = " << t.n_0 << "\nn_b = " << t.n_b
      << "\nsampling = " << quote(domain::strategy_name(t.sampling)) << "\nworkers = " << t.workers
      << "\nseed = " << t.seed << '\n';
  out << "\n[training.optimizer]\nkind = "
      << (t.optimizer.kind == solver::OptimizerConfig::Kind::kAdam ? "\"adam\"" : "\"sgd\"")
      << "\nlr = " << num(t.optimizer.adam.lr) << "\nbeta1 = " << num(t.optimizer.adam.beta1)
      << "\nbeta2 = " << num(t.optimizer.adam.beta2)
      << "\nepsilon = " << num(t.optimizer.adam.epsilon) << '\n';
  if (t.optimizer.param_lr) out << "param_lr = " << num(*t.optimizer.param_lr) << '\n';
  out << "\n[training.self_adaptive]\nenabled = " << (t.self_adaptive.enabled ? "true" : "false")
      << "\nlr_lambda = " << num(t.self_adaptive.lr_lambda) << '\n';
  if (c.data) out << "\n[data]\npath = " << quote(c.data->generic_string()) << '\n';
  out << "\n[output]\ndirectory = " << quote(c.output.generic_string())
      << "\nresolution = " << int_list(c.resolution) << '\n';
  return out.str();
}

}  // namespace pinn::app
