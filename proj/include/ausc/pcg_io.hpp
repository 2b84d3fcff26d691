#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ausc {

/// All recordings are brought to this rate before segmentation.
inline constexpr int kCanonicalRate = 2000;

enum class Label { Normal, Abnormal, Unknown };
enum class Quality { Good, Poor, Unknown };

std::string_view to_string(Label l);
std::string_view to_string(Quality q);
/// Accepts "normal"/"abnormal" (case-insensitive); throws ManifestError otherwise.
Label parse_label(std::string_view s);
/// Accepts "good"/"poor"/"unknown" (case-insensitive); throws ManifestError otherwise.
Quality parse_quality(std::string_view s);

struct PcgRecording {
    std::string id;
    std::string subject_id;
    std::vector<double> samples;  // each in [-1, 1]
    int sample_rate = 0;
    Label label = Label::Unknown;
    Quality quality = Quality::Unknown;

    double duration() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

struct ManifestEntry {
    std::string record_id;
    std::string path;
    Label label = Label::Unknown;
    Quality quality = Quality::Unknown;
    std::string subject_id;
};

/// CSV with header `record_id,path,label,quality,subject_id`.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    const ManifestEntry* find(std::string_view record_id) const;
};

// --- WAV -------------------------------------------------------------------

/// Decodes a RIFF/WAVE image holding 16-bit integer PCM, mono. Samples are
/// scaled by 1/32768. Label/quality stay Unknown.
PcgRecording decode_wav(std::span<const std::uint8_t> bytes, std::string id);

/// Reads a WAV file; the record id is the file stem.
PcgRecording load_wav(const std::filesystem::path& path);

/// 16-bit PCM mono encoder. Samples are mapped with round(x * 32768) and
/// clamped, so anything produced by decode_wav round-trips bit-exactly.
std::vector<std::uint8_t> encode_wav(const PcgRecording& rec);
void write_wav(const std::filesystem::path& path, const PcgRecording& rec);

// --- resampling ------------------------------------------------------------

struct ResampleOptions {
    double kaiser_beta = 8.0;
    int zero_crossings = 16;    // kernel half-width, in cutoff periods
    double cutoff_ratio = 0.9;  // cutoff as a fraction of the lower Nyquist rate
};

/// Windowed-sinc (Kaiser) resampler. Output length is
/// round(n * target_rate / sample_rate). Kernel weights are renormalized per
/// output sample (exact DC gain) and results are clamped to [-1, 1].
PcgRecording resample(const PcgRecording& rec, int target_rate, const ResampleOptions& opt = {});

// --- manifest --------------------------------------------------------------

DatasetManifest parse_manifest(std::istream& in);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);

struct JoinResult {
    std::vector<PcgRecording> records;  // manifest order
    std::size_t dropped = 0;            // loaded recordings with no manifest entry
};

/// Copies label/quality/subject_id from the manifest onto the recordings.
/// Throws ManifestError on duplicate manifest ids or on a manifest entry
/// whose recording was not loaded.
JoinResult join_manifest(std::vector<PcgRecording> recs, const DatasetManifest& manifest);

/// Loads every manifest entry (paths relative to `data_dir` unless absolute),
/// joins labels, and resamples to `target_rate`. Output follows manifest order.
std::vector<PcgRecording> load_dataset(const DatasetManifest& manifest, const std::filesystem::path& data_dir,
                                       int target_rate = kCanonicalRate);

}  // namespace ausc
