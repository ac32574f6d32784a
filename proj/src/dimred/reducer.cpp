#include "hystlab/dimred.hpp"

namespace hystlab::dimred {

using nlohmann::json;

std::string to_string(ReducerKind kind) {
  switch (kind) {
    case ReducerKind::None: return "none";
    case ReducerKind::Pca: return "pca";
    case ReducerKind::FReg: return "freg";
  }
  return "none";
}

ReducerKind reducer_kind_from_string(const std::string& name) {
  if (name == "none") return ReducerKind::None;
  if (name == "pca") return ReducerKind::Pca;
  if (name == "freg") return ReducerKind::FReg;
  fail(ErrorCode::InvalidArgument, "unknown dimensionality reduction '" + name + "'");
}

ReducerKind Reducer::kind() const {
  if (std::holds_alternative<PcaProjector>(fitted)) return ReducerKind::Pca;
  if (std::holds_alternative<FRegSelector>(fitted)) return ReducerKind::FReg;
  return ReducerKind::None;
}

Matrix Reducer::apply(const Matrix& x) const {
  if (auto* p = std::get_if<PcaProjector>(&fitted)) return apply_pca(x, *p);
  if (auto* s = std::get_if<FRegSelector>(&fitted)) return apply_freg(x, *s);
  return x;
}

std::size_t Reducer::output_dim(std::size_t input_dim) const {
  if (auto* p = std::get_if<PcaProjector>(&fitted)) return p->output_dim();
  if (auto* s = std::get_if<FRegSelector>(&fitted)) return s->selected_indices.size();
  return input_dim;
}

Reducer fit_reducer(const Matrix& x, std::span<const double> y, const ReducerSettings& settings,
                    std::span<const std::string> feature_names) {
  switch (settings.kind) {
    case ReducerKind::Pca: return Reducer{fit_pca(x, settings.pca)};
    case ReducerKind::FReg:
      return Reducer{fit_freg(x, y, std::min(settings.freg_k, x.cols()), feature_names)};
    case ReducerKind::None: break;
  }
  return Reducer{};
}

json reducer_to_json(const Reducer& r) {
  json doc{{"kind", to_string(r.kind())}};
  if (auto* p = std::get_if<PcaProjector>(&r.fitted)) {
    doc["mean"] = p->mean;
    doc["rows"] = p->components.rows();
    doc["cols"] = p->components.cols();
    doc["components"] = p->components.data();
    doc["explained_variance_ratio"] = p->explained_variance_ratio;
  } else if (auto* s = std::get_if<FRegSelector>(&r.fitted)) {
    doc["input_dim"] = s->input_dim;
    doc["f_stats"] = s->f_stats;
    doc["p_values"] = s->p_values;
    doc["selected_indices"] = s->selected_indices;
    doc["selected_names"] = s->selected_names;
  }
  return doc;
}

Reducer reducer_from_json(const json& doc) {
  try {
    switch (reducer_kind_from_string(doc.at("kind").get<std::string>())) {
      case ReducerKind::Pca: {
        PcaProjector p;
        p.mean = doc.at("mean").get<std::vector<double>>();
        p.components = Matrix(doc.at("rows").get<std::size_t>(), doc.at("cols").get<std::size_t>(),
                              doc.at("components").get<std::vector<double>>());
        p.explained_variance_ratio = doc.at("explained_variance_ratio").get<std::vector<double>>();
        return Reducer{std::move(p)};
      }
      case ReducerKind::FReg: {
        FRegSelector s;
        s.input_dim = doc.at("input_dim").get<std::size_t>();
        s.f_stats = doc.at("f_stats").get<std::vector<double>>();
        s.p_values = doc.at("p_values").get<std::vector<double>>();
        s.selected_indices = doc.at("selected_indices").get<std::vector<std::size_t>>();
        s.selected_names = doc.at("selected_names").get<std::vector<std::string>>();
        return Reducer{std::move(s)};
      }
      case ReducerKind::None: break;
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("reducer: ") + e.what());
  }
  return Reducer{};
}

}  // namespace hystlab::dimred
