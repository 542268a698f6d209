#include "gridswitch/io.hpp"

#include "gridswitch/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gridswitch {

using nlohmann::json;

namespace {

void append_double(std::string& line, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  line.append(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t line_no) {
  double x = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, x);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse number '" +
                    std::string(field) + "'");
  }
  return x;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json layer_json(const DenseLayer& layer) {
  json w = json::array();
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      w.push_back(layer.weight(r, c));
    }
  }
  return {{"in", layer.weight.cols()},
          {"out", layer.weight.rows()},
          {"weights", std::move(w)},
          {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}};
}

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  data.validate();
  std::string line;
  for (std::size_t c = 0; c < data.width; ++c) {
    line += 'f';
    line += std::to_string(c);
    line += ',';
  }
  line += "target\n";
  out << line;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    line.clear();
    for (double x : data.row(r)) {
      append_double(line, x);
      line += ',';
    }
    append_double(line, data.targets[r]);
    line += '\n';
    out << line;
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("dataset CSV is empty");
  }
  Dataset data;
  {
    std::size_t cols = 0;
    std::stringstream header(line);
    std::string name;
    std::vector<std::string> names;
    while (std::getline(header, name, ',')) {
      names.push_back(name);
    }
    if (names.size() < 2 || names.back() != "target") {
      throw DataError("dataset CSV header must end with 'target'");
    }
    for (; cols + 1 < names.size(); ++cols) {
      if (names[cols] != "f" + std::to_string(cols)) {
        throw DataError("dataset CSV header: expected f" + std::to_string(cols) + ", got '" +
                        names[cols] + "'");
      }
    }
    data.width = cols;
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::string_view rest(line);
    std::size_t fields = 0;
    while (true) {
      const auto comma = rest.find(',');
      const auto field = rest.substr(0, comma);
      const double x = parse_double(field, line_no);
      if (fields < data.width) {
        data.features.push_back(x);
      } else if (fields == data.width) {
        data.targets.push_back(x);
      }
      ++fields;
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (fields != data.width + 1) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(data.width + 1) + " fields, got " + std::to_string(fields));
    }
  }
  data.validate();
  return data;
}

std::string dataset_sidecar_json(const Dataset& data) {
  std::string flags;
  flags.reserve(data.attacked.size());
  for (auto a : data.attacked) {
    flags += a ? '1' : '0';
  }
  const auto& p = data.provenance;
  json j{{"rows", data.rows()},
         {"width", data.width},
         {"seed", p.seed},
         {"n_dg", p.n_dg},
         {"snr_db", number_or_null(p.snr_db)},
         {"generator_version", p.generator_version},
         {"attack_probability", p.attack_probability},
         {"rows_skipped", p.rows_skipped},
         {"attacked", flags}};
  return j.dump(2) + "\n";
}

void apply_dataset_sidecar(Dataset& data, const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("rows").get<std::size_t>() != data.rows() ||
        j.at("width").get<std::size_t>() != data.width) {
      throw DataError("dataset sidecar disagrees with the CSV shape");
    }
    auto& p = data.provenance;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.n_dg = j.at("n_dg").get<std::size_t>();
    p.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                        : j.at("snr_db").get<double>();
    p.generator_version = j.at("generator_version").get<std::string>();
    p.attack_probability = j.at("attack_probability").get<double>();
    p.rows_skipped = j.value("rows_skipped", std::size_t{0});
    const auto flags = j.value("attacked", std::string{});
    data.attacked.clear();
    if (!flags.empty()) {
      if (flags.size() != data.rows()) {
        throw DataError("dataset sidecar attack flags disagree with the row count");
      }
      for (char c : flags) {
        data.attacked.push_back(c == '1' ? 1 : 0);
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset sidecar: ") + e.what());
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

void save_dataset(const std::filesystem::path& csv, const Dataset& data) {
  std::ofstream out(csv);
  if (!out) {
    throw DataError("cannot write " + csv.string());
  }
  write_dataset_csv(out, data);
  write_text(sidecar_path(csv), dataset_sidecar_json(data));
}

Dataset load_dataset(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) {
    throw DataError("cannot read " + csv.string());
  }
  Dataset data = read_dataset_csv(in);
  const auto side = sidecar_path(csv);
  if (std::filesystem::exists(side)) {
    apply_dataset_sidecar(data, read_text(side));
  }
  return data;
}

std::string model_json(const ModelFile& m) {
  const auto& est = m.estimator;
  json layers = json::array();
  for (const auto& layer : est.params.layers) {
    layers.push_back(layer_json(layer));
  }
  const auto& s = est.scaler;
  json j{
      {"format", "gridswitch-mlp"},
      {"version", 1},
      {"n_dg", m.n_dg},
      {"input_dim", est.input_dim()},
      {"config",
       {{"layer_count", m.config.layer_count},
        {"hidden_width", m.config.hidden_width},
        {"learning_rate", m.config.learning_rate},
        {"max_epochs", m.config.max_epochs},
        {"patience", m.config.patience},
        {"batch_size", m.config.batch_size},
        {"seed", m.config.seed}}},
      {"layers", std::move(layers)},
      {"standardization",
       {{"feature_mean",
         std::vector<double>(s.feature_mean.data(), s.feature_mean.data() + s.feature_mean.size())},
        {"feature_scale", std::vector<double>(s.feature_scale.data(),
                                              s.feature_scale.data() + s.feature_scale.size())},
        {"target_mean", s.target_mean},
        {"target_scale", s.target_scale}}},
      {"threshold",
       {{"sigma", m.policy.sigma},
        {"quantile", m.policy.quantile},
        {"safety_factor", m.policy.safety_factor},
        {"floor", m.policy.floor}}}};
  return j.dump(1) + "\n";
}

ModelFile parse_model_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "gridswitch-mlp") {
      throw DataError("not a gridswitch model document");
    }
    ModelFile m;
    m.n_dg = j.at("n_dg").get<std::size_t>();
    const auto& c = j.at("config");
    m.config.layer_count = c.at("layer_count").get<std::size_t>();
    m.config.hidden_width = c.at("hidden_width").get<std::size_t>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.max_epochs = c.at("max_epochs").get<std::size_t>();
    m.config.patience = c.at("patience").get<std::size_t>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& lj : j.at("layers")) {
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto out = lj.at("out").get<Eigen::Index>();
      const auto w = lj.at("weights").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != in * out) {
        throw ShapeError("model layer weight count does not match its shape");
      }
      DenseLayer layer;
      layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>(w.data(), out, in);
      layer.bias = vector_from(lj.at("bias"));
      m.estimator.params.layers.push_back(std::move(layer));
    }
    m.estimator.params.validate();
    const auto& s = j.at("standardization");
    m.estimator.scaler.feature_mean = vector_from(s.at("feature_mean"));
    m.estimator.scaler.feature_scale = vector_from(s.at("feature_scale"));
    m.estimator.scaler.target_mean = s.at("target_mean").get<double>();
    m.estimator.scaler.target_scale = s.at("target_scale").get<double>();
    if (static_cast<std::size_t>(m.estimator.scaler.feature_mean.size()) != m.estimator.input_dim() ||
        static_cast<std::size_t>(m.estimator.scaler.feature_scale.size()) !=
            m.estimator.input_dim()) {
      throw ShapeError("model standardization statistics do not match the input width");
    }
    const auto& t = j.at("threshold");
    m.policy.sigma = t.at("sigma").get<double>();
    m.policy.quantile = t.at("quantile").get<double>();
    m.policy.safety_factor = t.at("safety_factor").get<double>();
    m.policy.floor = t.at("floor").get<double>();
    m.policy.validate();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  write_text(path, model_json(model));
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model_json(read_text(path)); }

std::string tree_set_json(const TreeSet& trees) {
  json list = json::array();
  std::size_t n = 0;
  for (const auto& tree : trees) {
    n = tree.size();
    json edges = json::array();
    for (const auto& e : tree.edges()) {
      edges.push_back({e.from + 1, e.to + 1});
    }
    list.push_back({{"root", tree.root() + 1}, {"edges", std::move(edges)}});
  }
  json j{{"n", n}, {"count", trees.size()}, {"trees", std::move(list)}};
  return j.dump() + "\n";
}

TreeSet parse_tree_set_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const auto n = j.at("n").get<std::size_t>();
    TreeSet out;
    for (const auto& t : j.at("trees")) {
      const auto root = t.at("root").get<std::size_t>();
      if (root == 0) {
        throw TopologyError("tree roots are 1-based");
      }
      std::vector<Edge> edges;
      for (const auto& e : t.at("edges")) {
        const auto from = e.at(0).get<std::size_t>();
        const auto to = e.at(1).get<std::size_t>();
        if (from == 0 || to == 0) {
          throw TopologyError("tree edge endpoints are 1-based");
        }
        edges.push_back({from - 1, to - 1});
      }
      out.push_back(Arborescence(n, root - 1, std::move(edges)));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("tree set document: ") + e.what());
  }
}

std::string metrics_json(const Metrics& m) {
  return json{{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"count", m.count}}.dump();
}

std::string train_report_json(const TrainReport& r) {
  auto metrics = [](const Metrics& m) {
    return json{{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"count", m.count}};
  };
  json j{{"epochs_run", r.epochs_run},
         {"stopped_early", r.stopped_early},
         {"best_epoch", r.best_epoch},
         {"best_validation_loss", r.best_validation_loss},
         {"train", metrics(r.train)},
         {"validation", metrics(r.validation)},
         {"test", metrics(r.test)},
         {"wall_seconds", r.wall_seconds}};
  return j.dump(2) + "\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    throw DataError("cannot write " + path.string());
  }
}

} // namespace gridswitch
