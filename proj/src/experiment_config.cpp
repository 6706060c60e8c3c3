#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>

#include "ntklab/errors.hpp"
#include "ntklab/experiment.hpp"

namespace ntklab {

namespace {

const char* kRecipes[] = {"spectrum", "spectral-bias", "effective-rank",
                          "hessian-probe", "cover-audit"};

bool known_recipe(const std::string& name) {
  return std::find(std::begin(kRecipes), std::end(kRecipes), name) !=
         std::end(kRecipes);
}

void require_keys(const nlohmann::json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw validation_error("config: " + path + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok)
      throw validation_error("config: unknown key " + path + "." + it.key());
  }
}

std::string key_path(const std::string& path, const char* key) {
  return path + "." + key;
}

int get_int(const nlohmann::json& obj, const std::string& path,
            const char* key, int def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw validation_error("config: " + key_path(path, key) +
                           " must be an integer");
  return v.get<int>();
}

std::uint64_t get_u64(const nlohmann::json& obj, const std::string& path,
                      const char* key, std::uint64_t def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!(v.is_number_unsigned() ||
        (v.is_number_integer() && v.get<std::int64_t>() >= 0)))
    throw validation_error("config: " + key_path(path, key) +
                           " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

double get_double(const nlohmann::json& obj, const std::string& path,
                  const char* key, double def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!v.is_number())
    throw validation_error("config: " + key_path(path, key) +
                           " must be a number");
  return v.get<double>();
}

bool get_bool(const nlohmann::json& obj, const std::string& path,
              const char* key, bool def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!v.is_boolean())
    throw validation_error("config: " + key_path(path, key) +
                           " must be a boolean");
  return v.get<bool>();
}

std::string get_string(const nlohmann::json& obj, const std::string& path,
                       const char* key, const std::string& def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!v.is_string())
    throw validation_error("config: " + key_path(path, key) +
                           " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_double_list(const nlohmann::json& obj,
                                    const std::string& path, const char* key,
                                    std::vector<double> def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!v.is_array())
    throw validation_error("config: " + key_path(path, key) +
                           " must be an array of numbers");
  std::vector<double> out;
  for (const nlohmann::json& e : v) {
    if (!e.is_number())
      throw validation_error("config: " + key_path(path, key) +
                             " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> get_int_list(const nlohmann::json& obj,
                              const std::string& path, const char* key,
                              std::vector<int> def) {
  if (!obj.contains(key)) return def;
  const nlohmann::json& v = obj.at(key);
  if (!v.is_array())
    throw validation_error("config: " + key_path(path, key) +
                           " must be an array of integers");
  std::vector<int> out;
  for (const nlohmann::json& e : v) {
    if (!e.is_number_integer() && !e.is_number_unsigned())
      throw validation_error("config: " + key_path(path, key) +
                             " must be an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

Activation parse_activation(const std::string& name, const std::string& path) {
  if (name == "softplus") return Activation::Softplus;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "linear") return Activation::Linear;
  throw validation_error("config: " + path +
                         " must be one of softplus, tanh, sigmoid, linear");
}

NetworkSpec parse_network(const nlohmann::json& j, const std::string& path) {
  require_keys(j, path, {"input_dim", "activation", "asi", "layers"});
  NetworkSpec spec;
  spec.input_dim = get_int(j, path, "input_dim", 0);
  spec.activation = parse_activation(
      get_string(j, path, "activation", "softplus"),
      key_path(path, "activation"));
  spec.asi = get_bool(j, path, "asi", false);
  if (!j.contains("layers") || !j.at("layers").is_array())
    throw validation_error("config: " + key_path(path, "layers") +
                           " must be an array of layer objects");
  int index = 0;
  for (const nlohmann::json& lj : j.at("layers")) {
    const std::string lpath =
        key_path(path, "layers") + "[" + std::to_string(index++) + "]";
    require_keys(lj, lpath,
                 {"kind", "width", "filter_size", "channels", "pixels"});
    const std::string kind = get_string(lj, lpath, "kind", "fc");
    if (kind == "fc") {
      spec.layers.push_back(LayerSpec::fc(get_int(lj, lpath, "width", 0)));
    } else if (kind == "residual") {
      spec.layers.push_back(
          LayerSpec::residual(get_int(lj, lpath, "width", 0)));
    } else if (kind == "conv") {
      spec.layers.push_back(LayerSpec::conv(
          get_int(lj, lpath, "filter_size", 3),
          get_int(lj, lpath, "channels", 0), get_int(lj, lpath, "pixels", 0)));
    } else {
      throw validation_error("config: " + key_path(lpath, "kind") +
                             " must be one of fc, conv, residual");
    }
  }
  spec.validate();
  return spec;
}

DataConfig parse_data(const nlohmann::json& j, const std::string& path) {
  require_keys(j, path,
               {"source", "generator", "dim", "grid", "n", "holdout", "target",
                "images", "labels", "class"});
  DataConfig d;
  d.source = get_string(j, path, "source", d.source);
  if (d.source != "synthetic" && d.source != "idx")
    throw validation_error("config: " + key_path(path, "source") +
                           " must be synthetic or idx");
  d.generator = get_string(j, path, "generator", d.generator);
  if (d.generator != "sphere_uniform" && d.generator != "gaussian" &&
      d.generator != "blob_images")
    throw validation_error(
        "config: " + key_path(path, "generator") +
        " must be one of sphere_uniform, gaussian, blob_images");
  d.dim = get_int(j, path, "dim", d.dim);
  d.grid = get_int(j, path, "grid", d.grid);
  d.n = get_int(j, path, "n", d.n);
  d.holdout = get_int(j, path, "holdout", d.holdout);
  if (j.contains("target")) {
    const std::string tpath = key_path(path, "target");
    const nlohmann::json& t = j.at("target");
    require_keys(t, tpath, {"kind", "coefficients", "reference_seed"});
    d.target_kind = get_string(t, tpath, "kind", d.target_kind);
    d.coefficients = get_double_list(t, tpath, "coefficients", {});
    d.reference_seed = get_u64(t, tpath, "reference_seed", d.reference_seed);
  }
  d.images = get_string(j, path, "images", "");
  d.labels = get_string(j, path, "labels", "");
  d.target_class = get_int(j, path, "class", 0);
  if (d.source == "idx") {
    if (d.images.empty() || d.labels.empty())
      throw validation_error("config: " + path +
                             " needs images and labels paths for idx data");
    if (d.target_kind != "zero")
      throw validation_error("config: " + key_path(path, "target") +
                             " does not apply to idx data");
  }
  return d;
}

Schedule parse_schedule(const nlohmann::json& j, const std::string& path) {
  require_keys(j, path, {"eta0", "t_max", "checkpoints"});
  Schedule s;
  s.eta0 = get_double(j, path, "eta0", s.eta0);
  s.t_max = get_double(j, path, "t_max", s.t_max);
  if (!(s.eta0 > 0.0) || !(s.t_max > 0.0))
    throw validation_error("config: " + path +
                           " needs positive eta0 and t_max");
  if (!j.contains("checkpoints")) {
    s.checkpoints = geometric_checkpoints(s.t_max / 50.0, s.t_max, 8);
    return s;
  }
  const nlohmann::json& c = j.at("checkpoints");
  const std::string cpath = key_path(path, "checkpoints");
  if (c.is_array()) {
    for (const nlohmann::json& e : c) {
      if (!e.is_number())
        throw validation_error("config: " + cpath +
                               " must hold checkpoint times");
      s.checkpoints.push_back(e.get<double>());
    }
    return s;
  }
  require_keys(c, cpath, {"kind", "t_min", "count"});
  const std::string kind = get_string(c, cpath, "kind", "geometric");
  if (kind != "geometric")
    throw validation_error("config: " + key_path(cpath, "kind") +
                           " must be geometric");
  const double t_min = get_double(c, cpath, "t_min", s.t_max / 50.0);
  const int count = get_int(c, cpath, "count", 8);
  s.checkpoints = geometric_checkpoints(t_min, s.t_max, count);
  return s;
}

Eigen::MatrixXd parse_metric(const nlohmann::json& j,
                             const std::string& path) {
  if (!j.is_array() || j.empty())
    throw validation_error("config: " + path +
                           " must be a square matrix as rows of numbers");
  const Eigen::Index p = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(p, p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const nlohmann::json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != p)
      throw validation_error("config: " + path +
                             " must be a square matrix as rows of numbers");
    for (Eigen::Index c = 0; c < p; ++c) {
      const nlohmann::json& e = row.at(static_cast<std::size_t>(c));
      if (!e.is_number())
        throw validation_error("config: " + path +
                               " must be a square matrix as rows of numbers");
      m(r, c) = e.get<double>();
    }
  }
  return m;
}

nlohmann::json network_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["input_dim"] = spec.input_dim;
  j["activation"] = std::string(activation_name(spec.activation));
  j["asi"] = spec.asi;
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::json lj;
    switch (l.kind) {
      case LayerKind::FullyConnected:
        lj["kind"] = "fc";
        lj["width"] = l.width;
        break;
      case LayerKind::Residual:
        lj["kind"] = "residual";
        lj["width"] = l.width;
        break;
      case LayerKind::Convolutional:
        lj["kind"] = "conv";
        lj["filter_size"] = l.filter_size;
        lj["channels"] = l.width;
        lj["pixels"] = l.pixels;
        break;
    }
    layers.push_back(lj);
  }
  j["layers"] = layers;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  require_keys(doc, "$",
               {"recipe", "seed", "out", "network", "data", "schedule",
                "tracked", "spectrum", "deviation", "probe", "cover", "rank"});
  ExperimentConfig cfg;
  cfg.recipe = get_string(doc, "$", "recipe", "");
  if (!cfg.recipe.empty() && !known_recipe(cfg.recipe))
    throw validation_error(
        "config: $.recipe must be one of spectrum, spectral-bias, "
        "effective-rank, hessian-probe, cover-audit");
  cfg.seed = get_u64(doc, "$", "seed", 1);
  cfg.out = get_string(doc, "$", "out", "");
  if (doc.contains("network"))
    cfg.network = parse_network(doc.at("network"), "$.network");
  if (doc.contains("data")) cfg.data = parse_data(doc.at("data"), "$.data");
  if (doc.contains("schedule"))
    cfg.schedule = parse_schedule(doc.at("schedule"), "$.schedule");
  else
    cfg.schedule.checkpoints = geometric_checkpoints(
        cfg.schedule.t_max / 50.0, cfg.schedule.t_max, 8);
  cfg.tracked = get_int(doc, "$", "tracked", cfg.tracked);
  if (cfg.tracked < 1)
    throw validation_error("config: $.tracked must be at least 1");

  if (doc.contains("spectrum")) {
    const nlohmann::json& s = doc.at("spectrum");
    require_keys(s, "$.spectrum", {"k_max", "save_gram"});
    cfg.spectrum.k_max = get_int(s, "$.spectrum", "k_max", 0);
    cfg.spectrum.save_gram =
        get_bool(s, "$.spectrum", "save_gram", cfg.spectrum.save_gram);
  }
  if (doc.contains("deviation")) {
    const nlohmann::json& s = doc.at("deviation");
    require_keys(s, "$.deviation", {"k_list", "eps_slack"});
    cfg.deviation.k_list =
        get_int_list(s, "$.deviation", "k_list", cfg.deviation.k_list);
    cfg.deviation.eps_slack =
        get_double(s, "$.deviation", "eps_slack", cfg.deviation.eps_slack);
  }
  if (doc.contains("probe")) {
    const nlohmann::json& s = doc.at("probe");
    require_keys(s, "$.probe", {"widths", "inputs", "iterations"});
    cfg.probe.widths = get_int_list(s, "$.probe", "widths", cfg.probe.widths);
    cfg.probe.inputs = get_int(s, "$.probe", "inputs", cfg.probe.inputs);
    cfg.probe.iterations =
        get_int(s, "$.probe", "iterations", cfg.probe.iterations);
    if (cfg.probe.widths.empty() || cfg.probe.inputs < 1 ||
        cfg.probe.iterations < 1)
      throw validation_error("config: $.probe needs widths, inputs >= 1 and "
                             "iterations >= 1");
  }
  if (doc.contains("cover")) {
    const nlohmann::json& s = doc.at("cover");
    require_keys(s, "$.cover",
                 {"axes", "gamma", "audit_samples", "metric", "radius", "eps"});
    cfg.cover.axes = get_double_list(s, "$.cover", "axes", cfg.cover.axes);
    cfg.cover.gamma = get_double(s, "$.cover", "gamma", cfg.cover.gamma);
    cfg.cover.audit_samples =
        get_int(s, "$.cover", "audit_samples", cfg.cover.audit_samples);
    if (s.contains("metric")) {
      cfg.cover.has_metric = true;
      cfg.cover.metric = parse_metric(s.at("metric"), "$.cover.metric");
    }
    cfg.cover.radius = get_double(s, "$.cover", "radius", cfg.cover.radius);
    cfg.cover.eps = get_double(s, "$.cover", "eps", cfg.cover.eps);
  }
  if (doc.contains("rank")) {
    const nlohmann::json& s = doc.at("rank");
    require_keys(s, "$.rank",
                 {"sweep_points", "eps_min_ratio", "radius", "eps", "gamma"});
    cfg.rank.sweep_points =
        get_int(s, "$.rank", "sweep_points", cfg.rank.sweep_points);
    cfg.rank.eps_min_ratio =
        get_double(s, "$.rank", "eps_min_ratio", cfg.rank.eps_min_ratio);
    cfg.rank.radius = get_double(s, "$.rank", "radius", cfg.rank.radius);
    cfg.rank.eps = get_double(s, "$.rank", "eps", cfg.rank.eps);
    cfg.rank.gamma = get_double(s, "$.rank", "gamma", cfg.rank.gamma);
    if (cfg.rank.sweep_points < 1 || !(cfg.rank.eps_min_ratio > 0.0) ||
        cfg.rank.eps_min_ratio > 1.0)
      throw validation_error("config: $.rank needs sweep_points >= 1 and "
                             "eps_min_ratio in (0, 1]");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw validation_error("config: cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw validation_error("config: " + path.string() + " is not valid JSON ("
                           + e.what() + ")");
  }
  return parse_config(doc);
}

nlohmann::json resolved_config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["recipe"] = cfg.recipe;
  j["seed"] = cfg.seed;
  if (!cfg.out.empty()) j["out"] = cfg.out;
  if (!cfg.network.layers.empty()) j["network"] = network_json(cfg.network);
  {
    nlohmann::json d;
    d["source"] = cfg.data.source;
    if (cfg.data.source == "synthetic") {
      d["generator"] = cfg.data.generator;
      d["dim"] = cfg.data.dim;
      if (cfg.data.generator == "blob_images") d["grid"] = cfg.data.grid;
      d["n"] = cfg.data.n;
      d["holdout"] = cfg.data.holdout;
      nlohmann::json t;
      t["kind"] = cfg.data.target_kind;
      if (!cfg.data.coefficients.empty())
        t["coefficients"] = cfg.data.coefficients;
      t["reference_seed"] = cfg.data.reference_seed;
      d["target"] = t;
    } else {
      d["images"] = cfg.data.images;
      d["labels"] = cfg.data.labels;
      d["class"] = cfg.data.target_class;
      d["holdout"] = cfg.data.holdout;
    }
    j["data"] = d;
  }
  {
    nlohmann::json s;
    s["eta0"] = cfg.schedule.eta0;
    s["t_max"] = cfg.schedule.t_max;
    s["checkpoints"] = cfg.schedule.checkpoints;
    j["schedule"] = s;
  }
  j["tracked"] = cfg.tracked;
  j["spectrum"] = {{"k_max", cfg.spectrum.k_max},
                   {"save_gram", cfg.spectrum.save_gram}};
  j["deviation"] = {{"k_list", cfg.deviation.k_list},
                    {"eps_slack", cfg.deviation.eps_slack}};
  j["probe"] = {{"widths", cfg.probe.widths},
                {"inputs", cfg.probe.inputs},
                {"iterations", cfg.probe.iterations}};
  {
    nlohmann::json c;
    c["axes"] = cfg.cover.axes;
    c["gamma"] = cfg.cover.gamma;
    c["audit_samples"] = cfg.cover.audit_samples;
    if (cfg.cover.has_metric) {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index r = 0; r < cfg.cover.metric.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index cc = 0; cc < cfg.cover.metric.cols(); ++cc)
          row.push_back(cfg.cover.metric(r, cc));
        rows.push_back(row);
      }
      c["metric"] = rows;
    }
    c["radius"] = cfg.cover.radius;
    c["eps"] = cfg.cover.eps;
    j["cover"] = c;
  }
  j["rank"] = {{"sweep_points", cfg.rank.sweep_points},
               {"eps_min_ratio", cfg.rank.eps_min_ratio},
               {"radius", cfg.rank.radius},
               {"eps", cfg.rank.eps},
               {"gamma", cfg.rank.gamma}};
  return j;
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  if (d.source == "idx")
    return load_idx(d.images, d.labels, d.target_class, d.holdout);
  GeneratorSpec gen;
  if (d.generator == "sphere_uniform") gen = GeneratorSpec::sphere(d.dim);
  else if (d.generator == "gaussian") gen = GeneratorSpec::gaussian(d.dim);
  else gen = GeneratorSpec::blobs(d.grid);
  TargetSpec target;
  target.kind = d.target_kind;
  target.coefficients = d.coefficients;
  target.reference = cfg.network;
  target.reference_seed = d.reference_seed;
  if (target.kind != "zero" && target.kind != "random_smooth" &&
      cfg.network.layers.empty())
    throw validation_error(
        "config: $.network is required for eigenfunction targets");
  return synth_dataset(gen, target, d.n, d.holdout,
                       Rng(cfg.seed).child(0).seed());
}

}  // namespace ntklab
