#include <nlohmann/json.hpp>

#include "hystlab/core.hpp"
#include "hystlab/parallel.hpp"
#include "hystlab/textio.hpp"

namespace hystlab::core {

using nlohmann::json;

std::filesystem::path FleetManifest::resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : base_dir / p;
}

FleetManifest read_manifest(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(textio::read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  FleetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.fleet_id = doc.at("fleet_id").get<std::string>();
    for (const auto& f : doc.at("files")) {
      ManifestEntry e;
      e.path = f.at("path").get<std::string>();
      if (f.contains("units")) {
        for (const auto& [name, tag] : f.at("units").items()) {
          auto id = channel_from_name(name);
          require(id.has_value(), ErrorCode::Parse, path.string() + ": unknown channel '" + name + "' in units");
          e.units[*id] = unit_from_name(tag.get<std::string>());
        }
      }
      m.files.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const FleetManifest& manifest, const std::filesystem::path& path) {
  json doc;
  doc["fleet_id"] = manifest.fleet_id;
  doc["files"] = json::array();
  for (const auto& e : manifest.files) {
    json units = json::object();
    for (const auto& [id, tag] : e.units) units[std::string(channel_name(id))] = std::string(unit_name(tag));
    doc["files"].push_back({{"path", e.path}, {"units", units}});
  }
  textio::write_file(path, doc.dump(2) + "\n");
}

FleetLoad load_fleet(const FleetManifest& manifest, unsigned threads) {
  const std::size_t n = manifest.files.size();
  std::vector<std::optional<LoadedCycle>> loaded(n);
  std::vector<std::optional<FileError>> errors(n);

  parallel_for(n, threads == 0 ? worker_threads() : threads, [&](std::size_t i) {
    const auto& entry = manifest.files[i];
    const auto path = manifest.resolve(entry);
    try {
      require(std::filesystem::exists(path), ErrorCode::Io, "missing file " + path.string());
      LoadedCycle lc{read_cycle_csv(path, path.stem().string()), entry.units};
      lc.cycle.validate();
      loaded[i] = std::move(lc);
    } catch (const Error& e) {
      errors[i] = FileError{entry.path, e.what()};
    }
  });

  FleetLoad out;
  out.fleet_id = manifest.fleet_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (loaded[i]) out.cycles.push_back(std::move(*loaded[i]));
    if (errors[i]) out.errors.push_back(std::move(*errors[i]));
  }
  return out;
}

}  // namespace hystlab::core
