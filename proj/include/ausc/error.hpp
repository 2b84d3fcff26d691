#pragma once

#include <stdexcept>
#include <string>

namespace ausc {

/// Base of every error raised by the library. The CLI maps any `Error`
/// escaping a subcommand to exit code 2 (data error).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define AUSC_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                  \
    public:                                                      \
        explicit Name(const std::string& what) : Error(what) {}  \
    }

// pcg_io
AUSC_DEFINE_ERROR(FormatError);
AUSC_DEFINE_ERROR(UnsupportedChannels);
AUSC_DEFINE_ERROR(UnsupportedEncoding);
AUSC_DEFINE_ERROR(ManifestError);

// segmentation
AUSC_DEFINE_ERROR(TooShort);
AUSC_DEFINE_ERROR(DecodeError);
AUSC_DEFINE_ERROR(FitError);
AUSC_DEFINE_ERROR(SegmentationEmpty);

// features / configuration
AUSC_DEFINE_ERROR(ConfigError);

// tensor_nn
AUSC_DEFINE_ERROR(ShapeError);
AUSC_DEFINE_ERROR(TraceError);
AUSC_DEFINE_ERROR(CheckpointError);

// trainer
AUSC_DEFINE_ERROR(SplitError);
AUSC_DEFINE_ERROR(TrainError);
AUSC_DEFINE_ERROR(StitchError);
AUSC_DEFINE_ERROR(PredictError);

// scoring
AUSC_DEFINE_ERROR(TallyError);
AUSC_DEFINE_ERROR(ScoreError);

#undef AUSC_DEFINE_ERROR

}  // namespace ausc
