#pragma once

#include <string>

#include "weekcast/model.hpp"

namespace weekcast {

// JSON container for a trained model: kind, overrides, seed, scaler, and
// every parameter tensor keyed by layer index and tensor name. Doubles are
// written in shortest round-trip form, so save -> load reproduces each
// parameter bit for bit.
//
// Takes the model mutably because parameter views are mutable.
std::string model_to_json(Model& model);

// Rebuilds the stack from the recorded kind/overrides/seed and then loads the
// stored tensors over it, validating layer kinds and tensor shapes.
Model model_from_json(const std::string& text);

void save_model(Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace weekcast
