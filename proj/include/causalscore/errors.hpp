#pragma once

#include <stdexcept>
#include <string>

namespace causalscore {

// Base class for all recoverable errors raised by the library. The CLI maps
// these onto exit codes; the search loop catches them per trial.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CAUSALSCORE_DEFINE_ERROR(NAME)                                  \
    class NAME : public Error {                                         \
    public:                                                             \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

// dataset
CAUSALSCORE_DEFINE_ERROR(MissingColumn);
CAUSALSCORE_DEFINE_ERROR(NonBinaryTreatment);
CAUSALSCORE_DEFINE_ERROR(NonFiniteValue);
CAUSALSCORE_DEFINE_ERROR(DegenerateSplit);
CAUSALSCORE_DEFINE_ERROR(IoError);

// synthdata
CAUSALSCORE_DEFINE_ERROR(ConfigError);

// learners
CAUSALSCORE_DEFINE_ERROR(SingularSystem);
CAUSALSCORE_DEFINE_ERROR(NonBinaryTarget);
CAUSALSCORE_DEFINE_ERROR(ShapeMismatch);

// estimators
CAUSALSCORE_DEFINE_ERROR(MissingInstrument);
CAUSALSCORE_DEFINE_ERROR(SingleArmTrainingData);
CAUSALSCORE_DEFINE_ERROR(WeakInstrument);

// scoring
CAUSALSCORE_DEFINE_ERROR(NoMatchedRows);
CAUSALSCORE_DEFINE_ERROR(SingleArm);
CAUSALSCORE_DEFINE_ERROR(SingleInstrumentArm);
CAUSALSCORE_DEFINE_ERROR(EmptySample);
CAUSALSCORE_DEFINE_ERROR(ColumnMismatch);
CAUSALSCORE_DEFINE_ERROR(NoGroundTruth);

// search
CAUSALSCORE_DEFINE_ERROR(InvalidObjective);
CAUSALSCORE_DEFINE_ERROR(EmptyBudget);
CAUSALSCORE_DEFINE_ERROR(UnknownFamily);

#undef CAUSALSCORE_DEFINE_ERROR

}  // namespace causalscore
