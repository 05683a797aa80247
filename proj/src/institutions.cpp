#include "arena/institutions.hpp"

namespace arena::institutions {

namespace {

using model::Pattern;

const std::vector<CatalogEntry>& builtin_entries() {
  static const std::vector<CatalogEntry> kEntries = {
      {"sas", {}, {Pattern::pipeline, 2, 1, 0, 0, 0, "0.00", ""}},
      {"qin_han", {}, {Pattern::pipeline, 5, 5, 0, 0, 0, "0.00", "yushi"}},
      {"soviet", {}, {Pattern::pipeline, 6, 5, 0, 0, 0, "0.00", ""}},
      {"mongol", {}, {Pattern::pipeline, 7, 6, 0, 0, 0, "0.00", ""}},
      {"tang", {}, {Pattern::gated_pipeline, 6, 10, 1, 6, 0, "0.17", ""}},
      {"us_federal", {}, {Pattern::gated_pipeline, 9, 8, 5, 0, 0, "0.56", ""}},
      {"edo", {}, {Pattern::autonomous_cluster, 5, 8, 0, 4, 0, "0.00", "metsuke"}},
      {"athens", {}, {Pattern::consensus, 5, 10, 0, 0, 7, "0.00", ""}},
  };
  return kEntries;
}

}  // namespace

const CatalogEntry* Catalog::find(const std::string& id) const {
  for (const CatalogEntry& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<std::string> Catalog::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const CatalogEntry& e : entries) out.push_back(e.id);
  return out;
}

Catalog catalog(const std::filesystem::path& institutions_dir) {
  Catalog c;
  for (CatalogEntry e : builtin_entries()) {
    e.spec_path = institutions_dir / e.id / "spec.yaml";
    if (!std::filesystem::exists(e.spec_path)) {
      throw model::LoadError(model::LoadErrorKind::io,
                             "catalog: missing spec file " + e.spec_path.string());
    }
    c.entries.push_back(std::move(e));
  }
  return c;
}

model::GovernanceSpec load_institution(const std::filesystem::path& institutions_dir,
                                       const std::string& id) {
  return model::load_spec(institutions_dir / id / "spec.yaml");
}

}  // namespace arena::institutions
