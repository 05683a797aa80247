#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "arena/model.hpp"

// The shipped catalog of historical governance topologies and the shape each
// one is expected to load with. The expectations double as conformance
// fixtures: load_institution + summarize must reproduce them exactly.

namespace arena::institutions {

struct ExpectedShape {
  model::Pattern pattern = model::Pattern::pipeline;
  int stages = 0;
  int agents = 0;
  int gates = 0;
  int cluster_members = 0;
  int voters = 0;
  std::string gate_density_display;  // two decimals
  std::string monitor;               // empty when none
};

struct CatalogEntry {
  std::string id;
  std::filesystem::path spec_path;
  ExpectedShape expected;
};

struct Catalog {
  std::vector<CatalogEntry> entries;
  const CatalogEntry* find(const std::string& id) const;
  std::vector<std::string> ids() const;
};

Catalog catalog(const std::filesystem::path& institutions_dir);
model::GovernanceSpec load_institution(const std::filesystem::path& institutions_dir,
                                       const std::string& id);

}  // namespace arena::institutions
