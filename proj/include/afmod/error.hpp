#pragma once

#include <stdexcept>
#include <string>

namespace afmod {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define AFMOD_DEFINE_ERROR(Name)                                    \
    struct Name : Error {                                           \
        explicit Name(const std::string& msg = #Name) : Error(msg) {} \
    }

AFMOD_DEFINE_ERROR(InvalidGroupElement);
AFMOD_DEFINE_ERROR(DegenerateAction);
AFMOD_DEFINE_ERROR(ModelMismatch);
AFMOD_DEFINE_ERROR(OutsideHalfPlane);
AFMOD_DEFINE_ERROR(NotATangentVector);
AFMOD_DEFINE_ERROR(NearBoundary);
AFMOD_DEFINE_ERROR(OutsideDiscBundle);
AFMOD_DEFINE_ERROR(GroupConstructionError);
AFMOD_DEFINE_ERROR(EnumerationOverflow);
AFMOD_DEFINE_ERROR(TruncationInsufficient);
AFMOD_DEFINE_ERROR(MeshIdentificationError);
AFMOD_DEFINE_ERROR(MeshQualityError);
AFMOD_DEFINE_ERROR(InvalidState);
AFMOD_DEFINE_ERROR(LeavesAlmostFuchsianRegime);
AFMOD_DEFINE_ERROR(NewtonDivergence);
AFMOD_DEFINE_ERROR(ContinuationStall);
AFMOD_DEFINE_ERROR(DegeneratePlane);
AFMOD_DEFINE_ERROR(NormalizationError);
AFMOD_DEFINE_ERROR(GaussResidualTooLarge);
AFMOD_DEFINE_ERROR(PathLiftError);
AFMOD_DEFINE_ERROR(HolonomyInconsistent);
AFMOD_DEFINE_ERROR(DevelopingMapError);
AFMOD_DEFINE_ERROR(ArtifactNotFound);

#undef AFMOD_DEFINE_ERROR

} // namespace afmod
