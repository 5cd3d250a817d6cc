#pragma once

#include <stdexcept>
#include <string>

namespace cvsslab {

// Domain failures. Catch sites map these onto CLI exit codes (input
// problems -> 2, provider problems -> 3) or onto rejection counters.

#define CVSSLAB_DEFINE_ERROR(name)                                            \
  struct name : std::runtime_error {                                          \
    using std::runtime_error::runtime_error;                                  \
  }

// cvss
CVSSLAB_DEFINE_ERROR(MalformedVector);
CVSSLAB_DEFINE_ERROR(ContainsUnknown);
CVSSLAB_DEFINE_ERROR(InvalidValueForKind);
CVSSLAB_DEFINE_ERROR(UnknownValue);

// ingest / persistence
CVSSLAB_DEFINE_ERROR(MalformedRecord);
CVSSLAB_DEFINE_ERROR(IoFailure);
CVSSLAB_DEFINE_ERROR(SchemaMismatch);

// gateway
CVSSLAB_DEFINE_ERROR(EmptyBatch);
CVSSLAB_DEFINE_ERROR(OversizedBatch);
CVSSLAB_DEFINE_ERROR(CacheMiss);
CVSSLAB_DEFINE_ERROR(ProviderError);
CVSSLAB_DEFINE_ERROR(AuthError);

// metrics / analysis
CVSSLAB_DEFINE_ERROR(LengthMismatch);
CVSSLAB_DEFINE_ERROR(EmptyInput);
CVSSLAB_DEFINE_ERROR(SingleClass);
CVSSLAB_DEFINE_ERROR(DegenerateTable);
CVSSLAB_DEFINE_ERROR(CoverageMismatch);
CVSSLAB_DEFINE_ERROR(EmptyText);
CVSSLAB_DEFINE_ERROR(ZeroVariance);

// meta classifier
CVSSLAB_DEFINE_ERROR(WrongModelCount);
CVSSLAB_DEFINE_ERROR(TooFewPerClass);
CVSSLAB_DEFINE_ERROR(NonFiniteFeature);
CVSSLAB_DEFINE_ERROR(DimensionMismatch);

#undef CVSSLAB_DEFINE_ERROR

}  // namespace cvsslab
