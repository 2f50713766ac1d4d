#include "ptoc/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ptoc {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec json_to_vec(const json& arr, const std::string& key) {
  if (!arr.is_array()) throw ConfigError(key + " must be an array");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ConfigError(key + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

Mat diag_from(const Vec& d) {
  Mat m = Mat::Zero(d.size(), d.size());
  m.diagonal() = d;
  return m;
}

json config_to_tree(const ExperimentConfig& c) {
  json j;
  j["task"] = c.task;
  j["algo"] = c.algo;
  j["sobolev"] = c.sobolev;
  j["constraints"] = c.constraints;
  j["seed"] = c.seed;
  j["seeds"] = {{"sampling", c.seed_sampling},
                {"init", c.seed_init},
                {"sobolev", c.seed_sobolev},
                {"test", c.seed_test},
                {"fit", c.seed_fit}};
  j["out_dir"] = c.out_dir;
  j["workers"] = c.workers;
  j["record_wall_time"] = c.record_wall_time;
  j["system"] = {{"dt", c.dt},          {"horizon", c.horizon},
                 {"u_min", vec_to_json(c.u_min)},
                 {"u_max", vec_to_json(c.u_max)},
                 {"m1", c.m1},          {"l1", c.l1},
                 {"m2", c.m2},          {"l2", c.l2},
                 {"gravity", c.gravity}, {"damping", c.damping}};
  j["cost"] = {{"wp_diag", vec_to_json(c.wp_diag)},
               {"wu_diag", vec_to_json(c.wu_diag)},
               {"wx_diag", vec_to_json(c.wx_diag)},
               {"terminal_scale", c.terminal_scale},
               {"goal_kind", c.goal_kind},
               {"goal", vec_to_json(c.goal)}};
  j["sampling"] = {{"x0_lo", vec_to_json(c.x0_lo)},
                   {"x0_hi", vec_to_json(c.x0_hi)},
                   {"n_train", c.n_train},
                   {"n_test", c.n_test}};
  j["ddp"] = {{"max_iters", c.ddp.max_iters},
              {"grad_tol", c.ddp.grad_tol},
              {"ls_backtrack", c.ddp.ls_backtrack},
              {"ls_alpha_min", c.ddp.ls_alpha_min},
              {"ls_accept_ratio", c.ddp.ls_accept_ratio},
              {"reg_init", c.ddp.reg_init},
              {"reg_engage", c.ddp.reg_engage},
              {"reg_up", c.ddp.reg_up},
              {"reg_down", c.ddp.reg_down},
              {"reg_max", c.ddp.reg_max},
              {"boxqp_max_iters", c.ddp.boxqp_max_iters},
              {"boxqp_tol", c.ddp.boxqp_tol}};
  json hidden = json::array();
  for (int h : c.policy_init.hidden) hidden.push_back(h);
  j["policy"] = {{"hidden", hidden},
                 {"activation", c.policy_init.activation == Activation::kRelu
                                    ? "relu"
                                    : "tanh"}};
  j["learn"] = {{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"lr", c.adam.lr},
                {"beta1", c.adam.beta1},
                {"beta2", c.adam.beta2},
                {"eps", c.adam.eps},
                {"sobolev_weight", c.sobolev_weight},
                {"sobolev_directions", c.sobolev_directions},
                {"sobolev_unbiased_scale", c.sobolev_unbiased}};
  j["outer"] = {{"iters", c.outer_iters},
                {"mu", c.mu},
                {"eval_every", c.eval_every},
                {"resample_each_iter", c.resample_each_iter},
                {"early_stop_residual", c.early_stop_residual}};
  json ab;
  ab["algos"] = c.ablation.algos;
  ab["sobolev"] = c.ablation.sobolev;
  ab["multiple_shooting"] = json::array();
  for (bool b : c.ablation.multiple_shooting) ab["multiple_shooting"].push_back(b);
  ab["constraints"] = json::array();
  for (bool b : c.ablation.constraints) ab["constraints"].push_back(b);
  j["ablation"] = ab;
  return j;
}

void merge_strict(json& base, const json& overlay, const std::string& path) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) {
      throw ConfigError("unknown config key: " + key_path);
    }
    json& slot = base[it.key()];
    if (slot.is_object()) {
      if (!it.value().is_object()) {
        throw ConfigError(key_path + " must be an object");
      }
      merge_strict(slot, it.value(), key_path);
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
T get_num(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key + " must be a number");
  return j.get<T>();
}

bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key + " must be a boolean");
  return j.get<bool>();
}

std::string get_str(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key + " must be a string");
  return j.get<std::string>();
}

ExperimentConfig tree_to_config(const json& j) {
  ExperimentConfig c;
  c.task = get_str(j["task"], "task");
  c.algo = get_str(j["algo"], "algo");
  c.sobolev = get_str(j["sobolev"], "sobolev");
  c.constraints = get_bool(j["constraints"], "constraints");
  c.seed = get_num<std::uint64_t>(j["seed"], "seed");
  const json& seeds = j["seeds"];
  c.seed_sampling = get_num<std::uint64_t>(seeds["sampling"], "seeds.sampling");
  c.seed_init = get_num<std::uint64_t>(seeds["init"], "seeds.init");
  c.seed_sobolev = get_num<std::uint64_t>(seeds["sobolev"], "seeds.sobolev");
  c.seed_test = get_num<std::uint64_t>(seeds["test"], "seeds.test");
  c.seed_fit = get_num<std::uint64_t>(seeds["fit"], "seeds.fit");
  c.out_dir = get_str(j["out_dir"], "out_dir");
  c.workers = get_num<int>(j["workers"], "workers");
  c.record_wall_time = get_bool(j["record_wall_time"], "record_wall_time");

  const json& sys = j["system"];
  c.dt = get_num<double>(sys["dt"], "system.dt");
  c.horizon = get_num<int>(sys["horizon"], "system.horizon");
  c.u_min = json_to_vec(sys["u_min"], "system.u_min");
  c.u_max = json_to_vec(sys["u_max"], "system.u_max");
  c.m1 = get_num<double>(sys["m1"], "system.m1");
  c.l1 = get_num<double>(sys["l1"], "system.l1");
  c.m2 = get_num<double>(sys["m2"], "system.m2");
  c.l2 = get_num<double>(sys["l2"], "system.l2");
  c.gravity = get_num<double>(sys["gravity"], "system.gravity");
  c.damping = get_num<double>(sys["damping"], "system.damping");

  const json& cost = j["cost"];
  c.wp_diag = json_to_vec(cost["wp_diag"], "cost.wp_diag");
  c.wu_diag = json_to_vec(cost["wu_diag"], "cost.wu_diag");
  c.wx_diag = json_to_vec(cost["wx_diag"], "cost.wx_diag");
  c.terminal_scale = get_num<double>(cost["terminal_scale"], "cost.terminal_scale");
  c.goal_kind = get_str(cost["goal_kind"], "cost.goal_kind");
  c.goal = json_to_vec(cost["goal"], "cost.goal");

  const json& samp = j["sampling"];
  c.x0_lo = json_to_vec(samp["x0_lo"], "sampling.x0_lo");
  c.x0_hi = json_to_vec(samp["x0_hi"], "sampling.x0_hi");
  c.n_train = get_num<int>(samp["n_train"], "sampling.n_train");
  c.n_test = get_num<int>(samp["n_test"], "sampling.n_test");

  const json& ddp = j["ddp"];
  c.ddp.max_iters = get_num<int>(ddp["max_iters"], "ddp.max_iters");
  c.ddp.grad_tol = get_num<double>(ddp["grad_tol"], "ddp.grad_tol");
  c.ddp.ls_backtrack = get_num<double>(ddp["ls_backtrack"], "ddp.ls_backtrack");
  c.ddp.ls_alpha_min = get_num<double>(ddp["ls_alpha_min"], "ddp.ls_alpha_min");
  c.ddp.ls_accept_ratio =
      get_num<double>(ddp["ls_accept_ratio"], "ddp.ls_accept_ratio");
  c.ddp.reg_init = get_num<double>(ddp["reg_init"], "ddp.reg_init");
  c.ddp.reg_engage = get_num<double>(ddp["reg_engage"], "ddp.reg_engage");
  c.ddp.reg_up = get_num<double>(ddp["reg_up"], "ddp.reg_up");
  c.ddp.reg_down = get_num<double>(ddp["reg_down"], "ddp.reg_down");
  c.ddp.reg_max = get_num<double>(ddp["reg_max"], "ddp.reg_max");
  c.ddp.boxqp_max_iters =
      get_num<int>(ddp["boxqp_max_iters"], "ddp.boxqp_max_iters");
  c.ddp.boxqp_tol = get_num<double>(ddp["boxqp_tol"], "ddp.boxqp_tol");

  const json& pol = j["policy"];
  c.policy_init.hidden.clear();
  for (const auto& h : pol["hidden"]) {
    c.policy_init.hidden.push_back(get_num<int>(h, "policy.hidden"));
  }
  const std::string act = get_str(pol["activation"], "policy.activation");
  if (act == "relu") {
    c.policy_init.activation = Activation::kRelu;
  } else if (act == "tanh") {
    c.policy_init.activation = Activation::kTanh;
  } else {
    throw ConfigError("policy.activation must be relu or tanh");
  }

  const json& learn = j["learn"];
  c.epochs = get_num<int>(learn["epochs"], "learn.epochs");
  c.batch_size = get_num<int>(learn["batch_size"], "learn.batch_size");
  c.adam.lr = get_num<double>(learn["lr"], "learn.lr");
  c.adam.beta1 = get_num<double>(learn["beta1"], "learn.beta1");
  c.adam.beta2 = get_num<double>(learn["beta2"], "learn.beta2");
  c.adam.eps = get_num<double>(learn["eps"], "learn.eps");
  c.sobolev_weight = get_num<double>(learn["sobolev_weight"], "learn.sobolev_weight");
  c.sobolev_directions =
      get_num<int>(learn["sobolev_directions"], "learn.sobolev_directions");
  c.sobolev_unbiased =
      get_bool(learn["sobolev_unbiased_scale"], "learn.sobolev_unbiased_scale");

  const json& outer = j["outer"];
  c.outer_iters = get_num<int>(outer["iters"], "outer.iters");
  c.mu = get_num<double>(outer["mu"], "outer.mu");
  c.eval_every = get_num<int>(outer["eval_every"], "outer.eval_every");
  c.resample_each_iter =
      get_bool(outer["resample_each_iter"], "outer.resample_each_iter");
  c.early_stop_residual =
      get_num<double>(outer["early_stop_residual"], "outer.early_stop_residual");

  const json& ab = j["ablation"];
  c.ablation.algos.clear();
  for (const auto& a : ab["algos"]) c.ablation.algos.push_back(get_str(a, "ablation.algos"));
  c.ablation.sobolev.clear();
  for (const auto& s : ab["sobolev"]) c.ablation.sobolev.push_back(get_str(s, "ablation.sobolev"));
  c.ablation.multiple_shooting.clear();
  for (const auto& b : ab["multiple_shooting"]) {
    c.ablation.multiple_shooting.push_back(get_bool(b, "ablation.multiple_shooting"));
  }
  c.ablation.constraints.clear();
  for (const auto& b : ab["constraints"]) {
    c.ablation.constraints.push_back(get_bool(b, "ablation.constraints"));
  }
  return c;
}

}  // namespace

ExperimentConfig default_config(const std::string& task) {
  ExperimentConfig c;
  c.task = task;
  if (task == "lqr") {
    c.dt = 0.1;
    c.horizon = 50;
    c.u_min = Vec::Constant(1, -1.0);
    c.u_max = Vec::Constant(1, 1.0);
    c.wp_diag = Vec::Ones(2);
    c.wu_diag = Vec::Constant(1, 0.1);
    c.wx_diag = Vec::Zero(2);
    c.goal_kind = "state";
    c.goal = Vec::Zero(2);
    c.x0_lo = Vec::Constant(2, -1.0);
    c.x0_hi = Vec::Constant(2, 1.0);
  } else if (task == "pendulum") {
    c.dt = 0.05;
    c.horizon = 100;
    c.u_min = Vec::Constant(1, -2.5);
    c.u_max = Vec::Constant(1, 2.5);
    c.wp_diag = Vec::Constant(2, 10.0);
    c.wu_diag = Vec::Constant(1, 0.01);
    c.wx_diag = Vec::Zero(2);
    c.wx_diag[1] = 0.1;
    c.goal_kind = "ee";
    c.goal = Vec(2);
    c.goal << 0.0, 1.0;
    c.x0_lo = Vec::Constant(2, -0.5);
    c.x0_hi = Vec::Constant(2, 0.5);
  } else if (task == "double_pendulum") {
    c.dt = 0.05;
    c.horizon = 100;
    c.u_min = Vec::Constant(2, -5.0);
    c.u_max = Vec::Constant(2, 5.0);
    c.wp_diag = Vec::Constant(2, 10.0);
    c.wu_diag = Vec::Constant(2, 0.01);
    c.wx_diag = Vec::Zero(4);
    c.wx_diag[2] = 0.1;
    c.wx_diag[3] = 0.1;
    c.goal_kind = "ee";
    c.goal = Vec(2);
    c.goal << 0.0, 2.0;
    c.x0_lo = Vec::Constant(4, -0.3);
    c.x0_hi = Vec::Constant(4, 0.3);
  } else {
    throw ConfigError("unknown task: " + task);
  }
  // derive sub-seeds from the master seed
  c.seed_sampling = split_seed(c.seed, 0);
  c.seed_init = split_seed(c.seed, 1);
  c.seed_sobolev = split_seed(c.seed, 2);
  c.seed_test = split_seed(c.seed, 3);
  c.seed_fit = split_seed(c.seed, 4);
  return c;
}

SystemSpec ExperimentConfig::make_spec() const {
  SystemSpec s;
  if (task == "lqr") {
    s = lqr_spec(dt, 1.0);
  } else if (task == "pendulum") {
    s = pendulum_spec(dt, 1.0);
  } else {
    s = double_pendulum_spec(dt, 1.0);
  }
  s.dt = dt;
  s.m1 = m1;
  s.l1 = l1;
  s.m2 = m2;
  s.l2 = l2;
  s.gravity = gravity;
  s.damping = damping;
  s.u_min = u_min;
  s.u_max = u_max;
  s.validate();
  return s;
}

Ocp ExperimentConfig::make_ocp() const {
  Ocp ocp;
  ocp.spec = make_spec();
  ocp.weights.wp = diag_from(wp_diag);
  ocp.weights.wu = diag_from(wu_diag);
  ocp.weights.wx = diag_from(wx_diag);
  ocp.weights.terminal_scale = terminal_scale;
  ocp.horizon = horizon;
  ocp.validate();
  return ocp;
}

SamplingConfig ExperimentConfig::make_sampling() const {
  SamplingConfig s;
  s.x0_lo = x0_lo;
  s.x0_hi = x0_hi;
  s.goal.kind = goal_kind == "state" ? GoalDesc::Kind::kState
                                     : GoalDesc::Kind::kEndEffector;
  s.goal.target = goal;
  return s;
}

DdpSettings ExperimentConfig::solver_settings() const {
  DdpSettings s = ddp;
  s.respect_bounds = constraints;
  return s;
}

OuterLoopConfig ExperimentConfig::make_outer() const {
  OuterLoopConfig o;
  o.ocp = make_ocp();
  const SamplingConfig sampling = make_sampling();
  o.sampling = sampling;
  o.train = sample_params(sampling, n_train, seed_sampling);
  o.test = sample_params(sampling, n_test, seed_test);
  o.outer_iters = outer_iters;
  o.mu_init = mu;
  o.multiple_shooting = algo == "plal_ms";
  o.resample_each_iter = resample_each_iter;
  o.early_stop_residual = early_stop_residual;
  o.workers = workers;
  o.eval_every = eval_every;
  o.ddp = solver_settings();
  o.policy = policy_init;
  o.policy.seed = seed_init;
  o.fit.epochs = epochs;
  o.fit.batch_size = batch_size;
  o.fit.adam = adam;
  o.fit.seed = seed_fit;
  if (sobolev == "full") {
    o.fit.sobolev.mode = SobolevConfig::Mode::kFull;
  } else if (sobolev == "stochastic") {
    o.fit.sobolev.mode = SobolevConfig::Mode::kStochastic;
  } else {
    o.fit.sobolev.mode = SobolevConfig::Mode::kOff;
  }
  o.fit.sobolev.weight = sobolev_weight;
  o.fit.sobolev.directions = sobolev_directions;
  o.fit.sobolev.unbiased_scale = sobolev_unbiased;
  o.sobolev_seed = seed_sobolev;
  return o;
}

std::string ExperimentConfig::variant_name() const {
  std::string name = algo == "pddp" ? "pddp" : "plal";
  if (algo == "plal_ms") name += "+M";
  if (sobolev != "off") name += "+S";
  if (!constraints) name += "-C";
  return name;
}

void ExperimentConfig::validate() const {
  if (task != "lqr" && task != "pendulum" && task != "double_pendulum") {
    throw ConfigError("unknown task: " + task);
  }
  if (algo != "pddp" && algo != "plal" && algo != "plal_ms") {
    throw ConfigError("unknown algo: " + algo);
  }
  if (sobolev != "off" && sobolev != "full" && sobolev != "stochastic") {
    throw ConfigError("unknown sobolev mode: " + sobolev);
  }
  if (goal_kind != "state" && goal_kind != "ee") {
    throw ConfigError("cost.goal_kind must be state or ee");
  }
  if (n_train < 1 || n_test < 1) throw ConfigError("sample counts must be >= 1");
  if (outer_iters < 1) throw ConfigError("outer.iters must be >= 1");
  if (epochs < 0 || batch_size < 1) throw ConfigError("invalid learn settings");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (eval_every < 1) throw ConfigError("outer.eval_every must be >= 1");
  if ((algo == "plal" || algo == "plal_ms") && mu < 1e-6) {
    throw ConfigError("outer.mu below 1e-6 is not supported");
  }
  solver_settings().validate();
  if (resample_each_iter && algo != "pddp") {
    throw ConfigError("outer.resample_each_iter requires algo=pddp");
  }
  const SystemSpec spec = make_spec();
  if (x0_lo.size() != spec.nx || x0_hi.size() != spec.nx) {
    throw ConfigError("sampling box must have dimension nx");
  }
  for (Eigen::Index i = 0; i < x0_lo.size(); ++i) {
    if (x0_lo[i] > x0_hi[i]) throw ConfigError("sampling box has lo > hi");
  }
  const Eigen::Index goal_dim =
      goal_kind == "state" ? spec.nx : (spec.kind == SystemKind::kLqr ? spec.nx : 2);
  if (goal.size() != goal_dim) throw ConfigError("cost.goal has wrong dimension");
  if (wp_diag.size() != goal_dim) throw ConfigError("cost.wp_diag has wrong dimension");
  if (wu_diag.size() != spec.nu) throw ConfigError("cost.wu_diag has wrong dimension");
  if (wx_diag.size() != spec.nx) throw ConfigError("cost.wx_diag has wrong dimension");
  if ((wp_diag.array() < 0).any() || (wu_diag.array() < 0).any() ||
      (wx_diag.array() < 0).any()) {
    throw ConfigError("cost weights must be nonnegative");
  }
  if (policy_init.hidden.empty()) throw ConfigError("policy.hidden must be nonempty");
  for (int h : policy_init.hidden) {
    if (h < 1) throw ConfigError("policy.hidden entries must be >= 1");
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig parse_config_text(const std::string& text) {
  json file;
  try {
    file = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!file.is_object()) throw ConfigError("config root must be an object");

  std::string task = "lqr";
  if (file.contains("task")) task = get_str(file["task"], "task");

  ExperimentConfig defaults = default_config(task);
  // re-derive sub-seeds when the file sets a master seed without explicit
  // per-stream overrides
  if (file.contains("seed")) {
    defaults.seed = get_num<std::uint64_t>(file["seed"], "seed");
    defaults.seed_sampling = split_seed(defaults.seed, 0);
    defaults.seed_init = split_seed(defaults.seed, 1);
    defaults.seed_sobolev = split_seed(defaults.seed, 2);
    defaults.seed_test = split_seed(defaults.seed, 3);
    defaults.seed_fit = split_seed(defaults.seed, 4);
  }

  json tree = config_to_tree(defaults);
  merge_strict(tree, file, "");
  ExperimentConfig cfg = tree_to_config(tree);
  cfg.validate();
  return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) {
  return config_to_tree(cfg).dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = dump_config(cfg);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace ptoc
