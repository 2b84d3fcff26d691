#include "ausc/pcg_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "ausc/error.hpp"
#include "ausc/text.hpp"

namespace ausc {

std::string_view to_string(Label l) {
    switch (l) {
        case Label::Normal: return "normal";
        case Label::Abnormal: return "abnormal";
        default: return "unknown";
    }
}

std::string_view to_string(Quality q) {
    switch (q) {
        case Quality::Good: return "good";
        case Quality::Poor: return "poor";
        default: return "unknown";
    }
}

Label parse_label(std::string_view s) {
    const auto v = text::lower(text::trim(s));
    if (v == "normal") return Label::Normal;
    if (v == "abnormal") return Label::Abnormal;
    throw ManifestError("label must be normal or abnormal, got '" + std::string(s) + "'");
}

Quality parse_quality(std::string_view s) {
    const auto v = text::lower(text::trim(s));
    if (v == "good") return Quality::Good;
    if (v == "poor") return Quality::Poor;
    if (v == "unknown") return Quality::Unknown;
    throw ManifestError("quality must be good, poor or unknown, got '" + std::string(s) + "'");
}

const ManifestEntry* DatasetManifest::find(std::string_view record_id) const {
    for (const auto& e : entries) {
        if (e.record_id == record_id) return &e;
    }
    return nullptr;
}

// --- WAV -------------------------------------------------------------------

namespace {

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

    bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void skip(std::size_t n) { pos_ = std::min(bytes_.size(), pos_ + n); }

    std::string tag() {
        need(4);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
        pos_ += 4;
        return s;
    }
    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (!has(n)) throw FormatError("truncated WAV data");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

PcgRecording decode_wav(std::span<const std::uint8_t> bytes, std::string id) {
    ByteReader r(bytes);
    if (!r.has(12)) throw FormatError("file too short for a RIFF header");
    if (r.tag() != "RIFF") throw FormatError("missing RIFF tag");
    r.u32();
    if (r.tag() != "WAVE") throw FormatError("missing WAVE tag");

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::span<const std::uint8_t> data;
    bool have_data = false;

    while (r.remaining() >= 8 && !have_data) {
        const std::string id_tag = r.tag();
        const std::uint32_t size = r.u32();
        if (id_tag == "fmt ") {
            if (size < 16) throw FormatError("fmt chunk too small");
            const std::size_t start = r.pos();
            std::uint16_t format = r.u16();
            channels = r.u16();
            rate = r.u32();
            r.u32();  // byte rate
            r.u16();  // block align
            bits = r.u16();
            if (format == kFormatExtensible) {
                if (size < 40) throw FormatError("extensible fmt chunk too small");
                r.u16();  // cbSize
                r.u16();  // valid bits
                r.u32();  // channel mask
                format = r.u16();  // first two bytes of the sub-format GUID
            }
            if (format != kFormatPcm) {
                throw UnsupportedEncoding("only integer PCM is supported (format tag " + std::to_string(format) + ")");
            }
            r.skip(size - (r.pos() - start) + (size & 1));
            have_fmt = true;
        } else if (id_tag == "data") {
            if (!have_fmt) throw FormatError("data chunk before fmt chunk");
            if (size > r.remaining()) throw FormatError("data chunk runs past end of file");
            data = r.take(size);
            have_data = true;
        } else {
            if (size > r.remaining()) throw FormatError("chunk '" + id_tag + "' runs past end of file");
            r.skip(size + (size & 1));
        }
    }
    if (!have_fmt) throw FormatError("missing fmt chunk");
    if (!have_data) throw FormatError("missing data chunk");
    if (channels != 1) throw UnsupportedChannels("expected mono, got " + std::to_string(channels) + " channels");
    if (bits != 16) throw UnsupportedEncoding("expected 16-bit PCM, got " + std::to_string(bits) + "-bit");
    if (rate == 0) throw FormatError("sample rate is zero");
    if (data.size() < 2) throw FormatError("no samples");

    PcgRecording rec;
    rec.id = std::move(id);
    rec.sample_rate = static_cast<int>(rate);
    rec.samples.resize(data.size() / 2);
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
        rec.samples[i] = raw / 32768.0;
    }
    return rec;
}

PcgRecording load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes, path.stem().string());
    } catch (const Error& e) {
        // keep the concrete type, add the file name
        if (dynamic_cast<const UnsupportedChannels*>(&e)) throw UnsupportedChannels(path.string() + ": " + e.what());
        if (dynamic_cast<const UnsupportedEncoding*>(&e)) throw UnsupportedEncoding(path.string() + ": " + e.what());
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav(const PcgRecording& rec) {
    const auto n = static_cast<std::uint32_t>(rec.samples.size());
    std::vector<std::uint8_t> out;
    out.reserve(44 + 2 * n);
    put_tag(out, "RIFF");
    put_u32(out, 36 + 2 * n);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(rec.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(rec.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, 2 * n);
    for (double s : rec.samples) {
        const double v = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const PcgRecording& rec) {
    const auto bytes = encode_wav(rec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// --- resampling ------------------------------------------------------------

PcgRecording resample(const PcgRecording& rec, int target_rate, const ResampleOptions& opt) {
    if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
    if (rec.sample_rate <= 0) throw ConfigError("resample: source rate must be positive");
    PcgRecording out = rec;
    if (target_rate == rec.sample_rate) return out;

    const double rin = rec.sample_rate, rout = target_rate;
    const auto n_in = static_cast<std::ptrdiff_t>(rec.samples.size());
    const auto n_out = static_cast<std::size_t>(std::llround(double(n_in) * rout / rin));
    const double fc = 0.5 * std::min(rin, rout) * opt.cutoff_ratio;  // Hz
    const double half_width = opt.zero_crossings / (2.0 * fc);       // seconds
    const double i0_beta = std::cyl_bessel_i(0.0, opt.kaiser_beta);

    out.sample_rate = target_rate;
    out.samples.assign(n_out, 0.0);
    for (std::size_t m = 0; m < n_out; ++m) {
        const double t = double(m) / rout;
        const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((t - half_width) * rin)));
        const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor((t + half_width) * rin)));
        double acc = 0.0, wsum = 0.0;
        for (std::ptrdiff_t n = lo; n <= hi; ++n) {
            const double dt = t - double(n) / rin;
            const double x = 2.0 * fc * dt;
            const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
            const double ratio = dt / half_width;
            const double arg = std::max(0.0, 1.0 - ratio * ratio);
            const double w = sinc * std::cyl_bessel_i(0.0, opt.kaiser_beta * std::sqrt(arg)) / i0_beta;
            acc += w * rec.samples[static_cast<std::size_t>(n)];
            wsum += w;
        }
        out.samples[m] = wsum != 0.0 ? std::clamp(acc / wsum, -1.0, 1.0) : 0.0;
    }
    return out;
}

// --- manifest --------------------------------------------------------------

DatasetManifest parse_manifest(std::istream& in) {
    DatasetManifest m;
    std::string line;
    if (!std::getline(in, line)) throw ManifestError("empty manifest");
    const auto header = text::split(text::trim(line), ',');
    const std::vector<std::string> want = {"record_id", "path", "label", "quality", "subject_id"};
    if (header.size() != want.size() ||
        !std::equal(header.begin(), header.end(), want.begin(), [](const std::string& a, const std::string& b) {
            return text::trim(a) == b;
        })) {
        throw ManifestError("manifest header must be record_id,path,label,quality,subject_id");
    }
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(text::trim(line), ',');
        if (f.size() != 5) throw ManifestError("manifest line " + std::to_string(line_no) + ": expected 5 fields");
        ManifestEntry e{text::trim(f[0]), text::trim(f[1]), parse_label(f[2]), parse_quality(f[3]), text::trim(f[4])};
        if (e.record_id.empty()) throw ManifestError("manifest line " + std::to_string(line_no) + ": empty record_id");
        if (!seen.insert(e.record_id).second) throw ManifestError("duplicate record_id '" + e.record_id + "'");
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest " + path.string());
    return parse_manifest(in);
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
    out << "record_id,path,label,quality,subject_id\n";
    for (const auto& e : manifest.entries) {
        out << e.record_id << ',' << e.path << ',' << to_string(e.label) << ',' << to_string(e.quality) << ','
            << e.subject_id << '\n';
    }
}

JoinResult join_manifest(std::vector<PcgRecording> recs, const DatasetManifest& manifest) {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (!by_id.emplace(manifest.entries[i].record_id, i).second) {
            throw ManifestError("duplicate record_id '" + manifest.entries[i].record_id + "'");
        }
    }
    std::vector<std::size_t> rec_for_entry(manifest.entries.size(), recs.size());
    JoinResult result;
    for (std::size_t r = 0; r < recs.size(); ++r) {
        const auto it = by_id.find(recs[r].id);
        if (it == by_id.end()) {
            ++result.dropped;
            continue;
        }
        rec_for_entry[it->second] = r;
    }
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (rec_for_entry[i] == recs.size()) throw ManifestError("no recording loaded for '" + e.record_id + "'");
        PcgRecording rec = std::move(recs[rec_for_entry[i]]);
        rec.label = e.label;
        rec.quality = e.quality;
        rec.subject_id = e.subject_id;
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::vector<PcgRecording> load_dataset(const DatasetManifest& manifest, const std::filesystem::path& data_dir,
                                       int target_rate) {
    std::vector<PcgRecording> recs(manifest.entries.size());
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        std::filesystem::path p(e.path);
        if (p.is_relative()) p = data_dir / p;
        if (!std::filesystem::exists(p)) throw ManifestError("missing file for '" + e.record_id + "': " + p.string());
        recs[i] = load_wav(p);
        recs[i].id = e.record_id;
        recs[i] = resample(recs[i], target_rate);
    }
    return join_manifest(std::move(recs), manifest).records;
}

}  // namespace ausc
