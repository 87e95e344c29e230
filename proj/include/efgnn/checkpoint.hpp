#pragma once

#include <string>

#include "efgnn/training.hpp"

namespace efgnn {

/// Writes a trained model as line-oriented text. Weights are serialized with
/// enough digits that a load reproduces every value bit for bit.
void save_checkpoint(const TrainedModel& model, const std::string& path);

/// Loads a checkpoint written by save_checkpoint. Throws ParseError with the
/// offending line number on any structural or numeric problem.
TrainedModel load_checkpoint(const std::string& path);

}  // namespace efgnn
