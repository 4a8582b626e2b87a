#pragma once

#include <stdexcept>
#include <string>

namespace relloc {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define RELLOC_DEFINE_ERROR(Name)                                    \
    struct Name : Error {                                            \
        explicit Name(const std::string& what) : Error(what) {}      \
    }

// geometry
RELLOC_DEFINE_ERROR(DegenerateAngle);
RELLOC_DEFINE_ERROR(CoplanarConfiguration);
RELLOC_DEFINE_ERROR(CollinearProjection);
RELLOC_DEFINE_ERROR(MissingReading);
RELLOC_DEFINE_ERROR(TriangleInequalityViolation);
RELLOC_DEFINE_ERROR(HeightExceedsDistance);

// topology
RELLOC_DEFINE_ERROR(NoPathBetweenRobots);

// linear localizer
RELLOC_DEFINE_ERROR(AssumptionViolated);
RELLOC_DEFINE_ERROR(SingularNormalEquations);

// manifold optimization
RELLOC_DEFINE_ERROR(RetractUndefined);
RELLOC_DEFINE_ERROR(NoProgress);

// wtls
RELLOC_DEFINE_ERROR(ZeroLastComponent);
RELLOC_DEFINE_ERROR(RepeatedSmallestSingularValue);
RELLOC_DEFINE_ERROR(SolverNoProgress);

// nde
RELLOC_DEFINE_ERROR(DegenerateScene);
RELLOC_DEFINE_ERROR(Diverged);

// map estimator
RELLOC_DEFINE_ERROR(DegenerateGeometry);

// robust
RELLOC_DEFINE_ERROR(InsufficientTopology);
RELLOC_DEFINE_ERROR(Inoperable);

// simulator
RELLOC_DEFINE_ERROR(ExcitationFailure);
RELLOC_DEFINE_ERROR(FilterDiverged);

#undef RELLOC_DEFINE_ERROR

}  // namespace relloc
