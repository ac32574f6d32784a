#include <bit>
#include <cstdint>
#include <cstring>

#include "hystlab/harmonize.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::harmonize {

void write_stat_matrix_csv(const StatMatrix& m, const std::filesystem::path& path) {
  require(m.feature_names.size() == m.values.cols(), ErrorCode::DimensionMismatch,
          "feature name count does not match matrix width");
  std::string out;
  for (std::size_t c = 0; c < m.feature_names.size(); ++c) {
    if (c) out += ',';
    out += m.feature_names[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < m.values.rows(); ++r) {
    for (std::size_t c = 0; c < m.values.cols(); ++c) {
      if (c) out += ',';
      out += textio::format_double(m.values(r, c));
    }
    out += '\n';
  }
  textio::write_file(path, out);
}

StatMatrix read_stat_matrix_csv(const std::filesystem::path& path) {
  const std::string text = textio::read_file(path);
  std::string_view rest(text);
  auto take_line = [&rest]() {
    const auto pos = rest.find('\n');
    auto line = rest.substr(0, pos);
    rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  StatMatrix m;
  for (auto f : textio::split_fields(take_line())) m.feature_names.emplace_back(f);
  std::vector<double> data;
  std::size_t rows = 0;
  while (!rest.empty()) {
    auto line = take_line();
    if (line.empty()) continue;
    auto fields = textio::split_fields(line);
    require(fields.size() == m.feature_names.size(), ErrorCode::Parse,
            path.string() + ": row " + std::to_string(rows + 2) + " has wrong field count");
    for (auto f : fields) {
      double v = 0.0;
      require(textio::parse_double(f, v), ErrorCode::Parse, path.string() + ": bad number");
      data.push_back(v);
    }
    ++rows;
  }
  m.values = Matrix(rows, m.feature_names.size(), std::move(data));
  return m;
}

void write_seq_tensor(const SeqTensor& t, const std::filesystem::path& bin_path,
                      const std::filesystem::path& json_path) {
  std::string blob(t.values.size() * 8, '\0');
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(t.values[i]);
    for (int b = 0; b < 8; ++b) blob[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  textio::write_file(bin_path, blob);
  std::vector<std::string> order;
  for (std::size_t f = 0; f < t.features; ++f)
    order.emplace_back(f < core::kChannelCount ? std::string(core::channel_name(core::kAllChannels[f]))
                                               : "feature_" + std::to_string(f));
  nlohmann::json meta{{"N", t.n}, {"T", t.steps}, {"F", t.features}, {"feature_order", order}};
  textio::write_file(json_path, meta.dump(2) + "\n");
}

SeqTensor read_seq_tensor(const std::filesystem::path& bin_path, const std::filesystem::path& json_path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(textio::read_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, json_path.string() + ": " + e.what());
  }
  SeqTensor t(meta.at("N").get<std::size_t>(), meta.at("T").get<std::size_t>(), meta.at("F").get<std::size_t>());
  const std::string blob = textio::read_file(bin_path);
  require(blob.size() == t.values.size() * 8, ErrorCode::Format,
          bin_path.string() + ": size does not match sidecar shape");
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    t.values[i] = std::bit_cast<double>(bits);
  }
  return t;
}

}  // namespace hystlab::harmonize
