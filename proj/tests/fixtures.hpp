#pragma once

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "viewrank/data.hpp"

namespace fixtures {

using Row = std::tuple<std::string, std::string, double>;

// Dataset over `videos` with users in first-appearance order of `rows`.
inline viewrank::Dataset make(const std::vector<viewrank::Video>& videos, const std::vector<Row>& rows) {
  std::vector<viewrank::InteractionRow> ir;
  for (std::size_t i = 0; i < rows.size(); ++i)
    ir.push_back({std::get<0>(rows[i]), std::get<1>(rows[i]), std::get<2>(rows[i]), i + 2});
  std::vector<std::vector<viewrank::InteractionRow>> sets{ir};
  auto catalog = viewrank::build_catalog(videos, sets);
  return viewrank::make_dataset(catalog, ir);
}

inline std::istringstream text(const std::string& s) { return std::istringstream(s); }

}  // namespace fixtures
