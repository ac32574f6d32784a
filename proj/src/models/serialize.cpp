#include <bit>
#include <cstring>
#include <functional>

#include "hystlab/models.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::models {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

json lqr_hyper(const LqrParams& p) {
  return {{"l1", p.l1}, {"learning_rate", p.learning_rate}, {"max_epochs", p.max_epochs}, {"patience", p.patience}};
}

json qxgb_hyper(const QxgbParams& p) {
  return {{"learning_rate", p.learning_rate}, {"max_depth", p.max_depth}, {"subsample", p.subsample},
          {"lambda", p.lambda}, {"alpha", p.alpha}, {"min_child_weight", p.min_child_weight},
          {"colsample", p.colsample}, {"rounds", p.rounds}};
}

json qgru_hyper(const QgruParams& p) {
  return {{"hidden", p.hidden}, {"layers", p.layers}, {"learning_rate", p.learning_rate},
          {"batch_size", p.batch_size}, {"max_epochs", p.max_epochs}, {"patience", p.patience},
          {"clip_norm", p.clip_norm}, {"optimizer", to_string(p.optimizer)}};
}

void append_tree(const Tree& t, std::vector<float>& out) {
  out.push_back(static_cast<float>(t.nodes.size()));
  for (const auto& n : t.nodes) {
    out.push_back(static_cast<float>(n.feature));
    out.push_back(static_cast<float>(n.feature < 0 ? n.value : n.threshold));
  }
}

class BlobReader {
 public:
  explicit BlobReader(std::span<const float> b) : b_(b) {}
  double next() {
    require(pos_ < b_.size(), ErrorCode::Format, "model parameter blob is truncated");
    return static_cast<double>(b_[pos_++]);
  }
  std::size_t count() {
    const double v = next();
    require(v >= 0.0 && v == static_cast<double>(static_cast<std::size_t>(v)), ErrorCode::Format, "bad count in blob");
    return static_cast<std::size_t>(v);
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const float> b_;
  std::size_t pos_ = 0;
};

Tree read_tree(BlobReader& r, std::size_t input_dim) {
  const std::size_t n = r.count();
  require(n >= 1, ErrorCode::Format, "empty tree in blob");
  Tree t;
  t.nodes.resize(n);
  for (auto& node : t.nodes) {
    const double f = r.next();
    require(f >= -1.0 && f < static_cast<double>(input_dim) && f == static_cast<double>(static_cast<int>(f)),
            ErrorCode::Format, "bad feature index in tree");
    node.feature = static_cast<std::int32_t>(f);
    (node.feature < 0 ? node.value : node.threshold) = r.next();
  }
  // Rebuild child links from preorder.
  std::size_t pos = 0;
  std::function<void()> link = [&] {
    require(pos < n, ErrorCode::Format, "tree node list is truncated");
    const std::size_t self = pos++;
    if (t.nodes[self].feature < 0) return;
    t.nodes[self].left = static_cast<std::int32_t>(pos);
    link();
    t.nodes[self].right = static_cast<std::int32_t>(pos);
    link();
  };
  link();
  require(pos == n, ErrorCode::Format, "tree node list has trailing nodes");
  return t;
}

}  // namespace

std::vector<float> parameter_blob(const QuantileModel& m) {
  std::vector<float> out;
  if (const auto* l = std::get_if<LqrModel>(&m)) {
    for (std::size_t q = 0; q < l->quantiles.size(); ++q) {
      for (double w : l->weights[q]) out.push_back(static_cast<float>(w));
      out.push_back(static_cast<float>(l->intercepts[q]));
    }
  } else if (const auto* x = std::get_if<QxgbModel>(&m)) {
    for (std::size_t q = 0; q < x->quantiles.size(); ++q) {
      out.push_back(static_cast<float>(x->base_scores[q]));
      out.push_back(static_cast<float>(x->trees[q].size()));
      for (const auto& t : x->trees[q]) append_tree(t, out);
    }
  } else {
    const auto& g = std::get<QgruModel>(m);
    for (double v : g.params) out.push_back(static_cast<float>(v));
  }
  return out;
}

json model_header(const QuantileModel& m) {
  json h;
  h["format_version"] = kModelFormatVersion;
  h["kind"] = to_string(kind_of(m));
  h["quantiles"] = quantiles_of(m).levels();
  if (const auto* l = std::get_if<LqrModel>(&m)) {
    h["shapes"] = {{"input_dim", l->input_dim}};
    h["hyperparameters"] = lqr_hyper(l->params);
    h["seed"] = 0;
  } else if (const auto* x = std::get_if<QxgbModel>(&m)) {
    h["shapes"] = {{"input_dim", x->input_dim}};
    h["hyperparameters"] = qxgb_hyper(x->params);
    h["seed"] = x->seed;
  } else {
    const auto& g = std::get<QgruModel>(m);
    h["shapes"] = {{"input_dim", g.input_dim}, {"hidden", g.hidden}, {"layers", g.layers},
                   {"autoregressive", g.autoregressive}};
    h["hyperparameters"] = qgru_hyper(g.train_params);
    h["seed"] = g.seed;
  }
  return h;
}

std::string serialize_model(const QuantileModel& m, const json& extra) {
  json h = model_header(m);
  const auto blob = parameter_blob(m);
  h["blob_floats"] = blob.size();
  h["pipeline"] = extra.is_null() ? json::object() : extra;
  std::string out(kModelMagic, sizeof(kModelMagic));
  out += h.dump();
  out += '\n';
  const auto* bytes = reinterpret_cast<const char*>(blob.data());
  out.append(bytes, blob.size() * sizeof(float));
  return out;
}

LoadedModel deserialize_model(std::string_view bytes) {
  require(bytes.size() >= sizeof(kModelMagic) && std::memcmp(bytes.data(), kModelMagic, sizeof(kModelMagic)) == 0,
          ErrorCode::Format, "not a model file (bad magic)");
  const auto nl = bytes.find('\n', sizeof(kModelMagic));
  require(nl != std::string_view::npos, ErrorCode::Format, "model header is not terminated");
  json h;
  try {
    h = json::parse(bytes.substr(sizeof(kModelMagic), nl - sizeof(kModelMagic)));
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("corrupt model header: ") + e.what());
  }

  LoadedModel out;
  out.file_bytes = bytes.size();
  try {
    require(h.at("format_version").get<int>() == kModelFormatVersion, ErrorCode::Version,
            "unsupported model format version " + h.at("format_version").dump());
    const std::size_t n_floats = h.at("blob_floats").get<std::size_t>();
    const std::string_view raw = bytes.substr(nl + 1);
    require(raw.size() == n_floats * sizeof(float), ErrorCode::Format, "model blob size does not match header");
    std::vector<float> blob(n_floats);
    if (n_floats) std::memcpy(blob.data(), raw.data(), raw.size());
    BlobReader r(blob);

    const QuantileLevels quantiles(h.at("quantiles").get<std::vector<double>>());
    const auto& shapes = h.at("shapes");
    const auto& hp = h.at("hyperparameters");
    const std::size_t input_dim = shapes.at("input_dim").get<std::size_t>();
    switch (model_kind_from_string(h.at("kind").get<std::string>())) {
      case ModelKind::Lqr: {
        LqrModel m;
        m.quantiles = quantiles;
        m.input_dim = input_dim;
        m.params = {hp.at("l1").get<double>(), hp.at("learning_rate").get<double>(),
                    hp.at("max_epochs").get<std::size_t>(), hp.at("patience").get<std::size_t>()};
        for (std::size_t q = 0; q < quantiles.size(); ++q) {
          std::vector<double> w(input_dim);
          for (auto& v : w) v = r.next();
          m.weights.push_back(std::move(w));
          m.intercepts.push_back(r.next());
        }
        out.model = std::move(m);
        break;
      }
      case ModelKind::Qxgb: {
        QxgbModel m;
        m.quantiles = quantiles;
        m.input_dim = input_dim;
        m.seed = h.at("seed").get<std::uint64_t>();
        m.params = {hp.at("learning_rate").get<double>(), hp.at("max_depth").get<std::size_t>(),
                    hp.at("subsample").get<double>(), hp.at("lambda").get<double>(), hp.at("alpha").get<double>(),
                    hp.at("min_child_weight").get<double>(), hp.at("colsample").get<double>(),
                    hp.at("rounds").get<std::size_t>()};
        for (std::size_t q = 0; q < quantiles.size(); ++q) {
          m.base_scores.push_back(r.next());
          const std::size_t n_trees = r.count();
          std::vector<Tree> trees;
          for (std::size_t t = 0; t < n_trees; ++t) trees.push_back(read_tree(r, input_dim));
          m.trees.push_back(std::move(trees));
        }
        out.model = std::move(m);
        break;
      }
      case ModelKind::Qgru: {
        QgruModel m;
        m.quantiles = quantiles;
        m.input_dim = input_dim;
        m.hidden = shapes.at("hidden").get<std::size_t>();
        m.layers = shapes.at("layers").get<std::size_t>();
        m.autoregressive = shapes.at("autoregressive").get<bool>();
        m.seed = h.at("seed").get<std::uint64_t>();
        m.train_params = {hp.at("hidden").get<std::size_t>(), hp.at("layers").get<std::size_t>(),
                          hp.at("learning_rate").get<double>(), hp.at("batch_size").get<std::size_t>(),
                          hp.at("max_epochs").get<std::size_t>(), hp.at("patience").get<std::size_t>(),
                          hp.at("clip_norm").get<double>(), optimizer_from_string(hp.at("optimizer").get<std::string>())};
        require(m.layers >= 1 && m.layers <= 2 && m.hidden >= 1, ErrorCode::Format, "bad GRU shape in header");
        m.params.resize(qgru_param_count(m.input_dim, m.hidden, m.layers, quantiles.size()));
        for (auto& v : m.params) v = r.next();
        out.model = std::move(m);
        break;
      }
    }
    require(r.done(), ErrorCode::Format, "model blob has trailing values");
    out.pipeline = h.value("pipeline", json::object());
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("corrupt model header: ") + e.what());
  }
  return out;
}

void save_model(const QuantileModel& m, const std::filesystem::path& path, const json& extra) {
  textio::write_file(path, serialize_model(m, extra));
}

LoadedModel load_model(const std::filesystem::path& path) { return deserialize_model(textio::read_file(path)); }

}  // namespace hystlab::models
