#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "viewrank/data.hpp"
#include "viewrank/grouping.hpp"
#include "viewrank/scoring.hpp"

namespace viewrank {

inline constexpr int kCheckpointFormatVersion = 1;

// Trained networks together with the id vocabularies and length groups they
// were built against, so a test log can be scored without the training data.
struct Checkpoint {
  TrainedModel model;
  std::shared_ptr<const Catalog> catalog;
  GroupScheme scheme;
};

// JSON document; layout described in README.md.
void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in, const std::string& source = "checkpoint");

}  // namespace viewrank
