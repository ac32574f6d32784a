#include "hystlab/hystlab.h"

#include <cstring>
#include <string>

#include "hystlab/commands.hpp"

using nlohmann::json;
using namespace hystlab;

struct hyst_model {
  models::LoadedModel loaded;
  harness::Pipeline pipeline;
};

namespace {

thread_local std::string g_last_error;

hyst_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return HYST_INVALID_ARGUMENT;
    case ErrorCode::Io: return HYST_IO;
    case ErrorCode::Parse: return HYST_PARSE;
    case ErrorCode::Format: return HYST_FORMAT;
    case ErrorCode::Version: return HYST_VERSION;
    case ErrorCode::DimensionMismatch: return HYST_DIMENSION;
    case ErrorCode::Numeric: return HYST_NUMERIC;
    case ErrorCode::NoSamples: return HYST_NO_SAMPLES;
  }
  return HYST_INTERNAL;
}

template <class Fn>
hyst_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HYST_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return HYST_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HYST_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HYST_INTERNAL;
  }
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

json parse_options(const char* options_json) {
  if (!options_json || !*options_json) return json::object();
  json o;
  try {
    o = json::parse(options_json);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("options: ") + e.what());
  }
  require(o.is_object(), ErrorCode::InvalidArgument, "options must be a JSON object");
  return o;
}

template <class Cmd>
hyst_status command(Cmd cmd, const char* options_json, char** summary) {
  if (summary) *summary = nullptr;
  return guarded([&] {
    const json out = cmd(parse_options(options_json));
    if (summary) *summary = dup(out.dump());
  });
}

hyst_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return HYST_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* hyst_last_error(void) { return g_last_error.c_str(); }

const char* hyst_status_name(hyst_status s) {
  switch (s) {
    case HYST_OK: return "ok";
    case HYST_INVALID_ARGUMENT: return "invalid argument";
    case HYST_IO: return "i/o error";
    case HYST_PARSE: return "parse error";
    case HYST_FORMAT: return "format error";
    case HYST_VERSION: return "version mismatch";
    case HYST_DIMENSION: return "dimension mismatch";
    case HYST_NUMERIC: return "numeric error";
    case HYST_NO_SAMPLES: return "no samples";
    case HYST_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* hyst_version(void) { return "1.0.0"; }

hyst_status hyst_generate(const char* o, char** s) { return command(commands::generate, o, s); }
hyst_status hyst_harmonize(const char* o, char** s) { return command(commands::harmonize, o, s); }
hyst_status hyst_train(const char* o, char** s) { return command(commands::train, o, s); }
hyst_status hyst_evaluate(const char* o, char** s) { return command(commands::evaluate, o, s); }
hyst_status hyst_grid(const char* o, char** s) { return command(commands::grid, o, s); }
hyst_status hyst_transfer(const char* o, char** s) { return command(commands::transfer, o, s); }
hyst_status hyst_report(const char* o, char** s) { return command(commands::report, o, s); }
void hyst_free_string(char* s) { std::free(s); }

hyst_status hyst_model_load(const char* path, hyst_model** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<hyst_model>();
    m->loaded = models::load_model(path);
    m->pipeline = commands::pipeline_from(m->loaded);
    *out = m.release();
  });
}

hyst_status hyst_model_save(const hyst_model* model, const char* path) {
  if (!model) return null_arg("model");
  if (!path) return null_arg("path");
  return guarded([&] { models::save_model(model->loaded.model, path, model->loaded.pipeline); });
}

void hyst_model_free(hyst_model* model) { delete model; }

const char* hyst_model_kind(const hyst_model* model) {
  if (!model) return nullptr;
  switch (models::kind_of(model->loaded.model)) {
    case models::ModelKind::Lqr: return "lqr";
    case models::ModelKind::Qxgb: return "qxgb";
    case models::ModelKind::Qgru: return "qgru";
  }
  return nullptr;
}

size_t hyst_model_quantile_count(const hyst_model* model) {
  return model ? models::quantiles_of(model->loaded.model).size() : 0;
}

hyst_status hyst_model_quantiles(const hyst_model* model, double* out, size_t capacity) {
  if (!model) return null_arg("model");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto& q = models::quantiles_of(model->loaded.model);
    require(capacity >= q.size(), ErrorCode::DimensionMismatch, "output buffer too small");
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = q[i];
  });
}

size_t hyst_model_input_features(const hyst_model* model) { return model ? model->pipeline.scaler.min.size() : 0; }

int hyst_model_is_sequence(const hyst_model* model) {
  return model && model->pipeline.features == harness::FeatureKind::Tensor ? 1 : 0;
}

size_t hyst_model_rom_bytes(const hyst_model* model) {
  return model ? metrics::rom_bytes(model->loaded.model, model->loaded.pipeline) : 0;
}

size_t hyst_model_ram_bytes(const hyst_model* model, size_t steps) {
  if (!model) return 0;
  const auto& p = model->pipeline;
  metrics::InputShape shape;
  if (p.features == harness::FeatureKind::Stats) {
    shape = {1, p.reducer.output_dim(p.scaler.min.size())};
  } else {
    shape = {steps, std::get<models::QgruModel>(p.model).input_dim};
  }
  return metrics::ram_bytes(model->loaded.model, shape);
}

hyst_status hyst_model_predict(const hyst_model* model, const double* x, size_t n, size_t steps, size_t features,
                               double* out) {
  if (!model) return null_arg("model");
  if (n > 0 && (!x || !out)) return null_arg("x/out");
  return guarded([&] {
    const auto& p = model->pipeline;
    require(features == p.scaler.min.size(), ErrorCode::DimensionMismatch,
            "expected " + std::to_string(p.scaler.min.size()) + " features, got " + std::to_string(features));
    harness::SampleSet s;
    s.kind = p.features;
    if (p.features == harness::FeatureKind::Stats) {
      require(steps <= 1, ErrorCode::DimensionMismatch, "statistical models take one row per sample");
      s.stats = Matrix(n, features, std::vector<double>(x, x + n * features));
    } else {
      require(steps >= 1, ErrorCode::DimensionMismatch, "sequence input needs at least one step");
      s.tensor = harmonize::SeqTensor(n, steps, features);
      std::copy(x, x + n * steps * features, s.tensor.values.begin());
    }
    s.labels.assign(n, 0.0);
    s.parent.resize(n);
    s.position.assign(n, 0);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) s.parent[i] = rows[i] = i;
    if (n == 0) return;
    const Matrix pred = models::repair_quantile_crossing(p.predict(s, rows));
    std::copy(pred.data().begin(), pred.data().end(), out);
  });
}

hyst_status hyst_pinball(double y, double yhat, double tau, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    require(tau > 0.0 && tau < 1.0, ErrorCode::InvalidArgument, "tau must lie in (0, 1)");
    *out = metrics::pinball(y, yhat, tau);
  });
}

hyst_status hyst_aql(const double* y, const double* predictions, size_t n, const double* taus, size_t q, double* out) {
  if (!y || !predictions || !taus || !out) return null_arg("arguments");
  return guarded([&] {
    const core::QuantileLevels levels(std::vector<double>(taus, taus + q));
    const Matrix pred(n, q, std::vector<double>(predictions, predictions + n * q));
    *out = metrics::aql(std::span<const double>(y, n), pred, levels);
  });
}

size_t hyst_stat_count(void) { return harmonize::kStatCount; }

const char* hyst_stat_name(size_t index) {
  if (index >= harmonize::kStatCount) return nullptr;
  return harmonize::statistic_names()[index].c_str();
}

hyst_status hyst_stat_features(const double* x, size_t n, double* out) {
  if (!x || !out) return null_arg("x/out");
  return guarded([&] {
    const auto stats = harmonize::compute_statistics(std::span<const double>(x, n));
    std::copy(stats.begin(), stats.end(), out);
  });
}

}  // extern "C"
