#pragma once

#include <vector>

#include "relikit/mtrp/mtrp.hpp"

namespace relikit::mtrp::detail {

/// Baseline cumulative intensity (without the unit effect) at each event time
/// and at tau, plus the baseline intensity at each event time.
struct UnitTransform {
    std::vector<EventType> types;
    std::vector<double> cumulative;  // size events + 1, last entry at tau
    std::vector<double> intensity;   // size events
};

UnitTransform transform(const EventHistory& h, const MtrpParams& params);

double loglik(const UnitTransform& u, const Renewal& component, const Renewal& subsystem, double effect);

}  // namespace relikit::mtrp::detail
