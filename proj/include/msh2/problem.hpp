#pragma once

#include "msh2/sim.hpp"

#include <optional>
#include <string>

namespace msh2 {

/// Parsed problem file: plant matrices (row-major with explicit dimensions),
/// channel description, simulation block and optional sweep block.
struct ProblemFile {
    Plant plant;
    FeedbackKind design = FeedbackKind::Output;
    ChannelSpec channel;
    SimConfig sim;
    std::optional<SweepSpec> sweep;

    explicit ProblemFile(Plant plant_) : plant(std::move(plant_)) {}
};

/// Throws std::invalid_argument with a field-level message on any schema or
/// dimension violation; no numeric code runs before the file validates.
ProblemFile load_problem(const std::string& path);

void save_controller(const std::string& path, const Controller& controller,
                     const SynthesisResult& result);
Controller load_controller(const std::string& path);

}  // namespace msh2
