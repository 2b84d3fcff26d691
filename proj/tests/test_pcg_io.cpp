#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <vector>

#include "ausc/error.hpp"
#include "ausc/pcg_io.hpp"

using namespace ausc;

namespace {

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back(v >> 8);
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void tag(std::vector<std::uint8_t>& b, const char* s) { b.insert(b.end(), s, s + 4); }

// Hand-built RIFF image, independent of the encoder under test.
std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits, const std::vector<std::int16_t>& frames) {
    std::vector<std::uint8_t> b;
    const std::uint32_t data_len = std::uint32_t(frames.size() * 2);
    tag(b, "RIFF");
    put32(b, 36 + data_len);
    tag(b, "WAVE");
    tag(b, "fmt ");
    put32(b, 16);
    put16(b, format);
    put16(b, channels);
    put32(b, rate);
    put32(b, rate * channels * bits / 8);
    put16(b, std::uint16_t(channels * bits / 8));
    put16(b, bits);
    tag(b, "data");
    put32(b, data_len);
    for (auto s : frames) put16(b, std::uint16_t(s));
    return b;
}

double peak_hz(const std::vector<double>& x, int rate) {
    const std::size_t n = x.size();
    double best = -1, at = 0;
    for (std::size_t k = 1; k < n / 2; ++k) {
        std::complex<double> s = 0;
        for (std::size_t i = 0; i < n; ++i) s += x[i] * std::polar(1.0, -2 * std::numbers::pi * double(k * i) / double(n));
        if (std::abs(s) > best) {
            best = std::abs(s);
            at = double(k) * rate / double(n);
        }
    }
    return at;
}

}  // namespace

TEST_CASE("decode_wav reads rate and scales samples") {
    const auto bytes = wav_bytes(1, 1, 2000, 16, {0, 32767, -32768, 16384});
    const auto r = decode_wav(bytes, "a");
    CHECK(r.sample_rate == 2000);
    REQUIRE(r.samples.size() == 4);
    CHECK(r.samples[1] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-15));
    CHECK(r.samples[2] == -1.0);
    CHECK(r.samples[3] == 0.5);
    CHECK(r.label == Label::Unknown);
    CHECK(r.quality == Quality::Unknown);
}

TEST_CASE("decode_wav rejects bad input") {
    CHECK_THROWS_AS(decode_wav(wav_bytes(1, 2, 2000, 16, {1, 2, 3, 4}), "s"), UnsupportedChannels);
    CHECK_THROWS_AS(decode_wav(wav_bytes(3, 1, 2000, 16, {1, 2}), "f"), UnsupportedEncoding);
    auto b = wav_bytes(1, 1, 2000, 16, {1, 2});
    b[0] = 'X';
    CHECK_THROWS_AS(decode_wav(b, "h"), FormatError);
    CHECK_THROWS_AS(decode_wav(std::vector<std::uint8_t>(10, 0), "t"), FormatError);
}

TEST_CASE("wav write and load round trip is bit-exact") {
    std::vector<std::int16_t> raw;
    for (int i = 0; i < 500; ++i) raw.push_back(std::int16_t((i * 7919) % 65536 - 32768));
    auto rec = decode_wav(wav_bytes(1, 1, 2000, 16, raw), "rt");
    const auto dir = std::filesystem::temp_directory_path() / "ausc_pcg_io_test";
    std::filesystem::create_directories(dir);
    write_wav(dir / "rt.wav", rec);
    const auto back = load_wav(dir / "rt.wav");
    CHECK(back.id == "rt");
    CHECK(back.sample_rate == 2000);
    CHECK(back.samples == rec.samples);
    CHECK(encode_wav(back) == encode_wav(rec));
    std::filesystem::remove_all(dir);
}

TEST_CASE("resample keeps the length ratio, DC level and tone frequency") {
    PcgRecording r{"x", "", std::vector<double>(8000, 0.5), 4000};
    const auto dc = resample(r, 2000);
    CHECK(dc.sample_rate == 2000);
    REQUIRE(dc.samples.size() == 4000);
    for (double v : dc.samples) CHECK(std::abs(v - 0.5) < 1e-6);

    PcgRecording s{"s", "", std::vector<double>(4000), 4000};
    for (std::size_t i = 0; i < s.samples.size(); ++i) s.samples[i] = 0.8 * std::sin(2 * std::numbers::pi * 50 * double(i) / 4000);
    const auto down = resample(s, 2000);
    CHECK(peak_hz(s.samples, 4000) == doctest::Approx(50));
    CHECK(peak_hz(down.samples, 2000) == doctest::Approx(50));
}

TEST_CASE("manifest parsing and join") {
    std::istringstream in(
        "record_id,path,label,quality,subject_id\n"
        "a,a.wav,normal,good,s1\n"
        "b,b.wav,abnormal,poor,s2\n"
        "c,c.wav,Normal,unknown,s3\n");
    const auto m = parse_manifest(in);
    REQUIRE(m.entries.size() == 3);
    CHECK(m.find("b")->label == Label::Abnormal);
    CHECK(m.find("b")->quality == Quality::Poor);
    CHECK(m.find("c")->quality == Quality::Unknown);
    CHECK(m.find("zz") == nullptr);

    std::ostringstream out;
    write_manifest(out, m);
    std::istringstream again(out.str());
    const auto m2 = parse_manifest(again);
    CHECK(m2.entries.size() == 3);
    CHECK(m2.find("a")->subject_id == "s1");

    std::vector<PcgRecording> recs(3);
    recs[0].id = "a";
    recs[1].id = "b";
    recs[2].id = "c";
    const auto all = join_manifest(recs, m);
    CHECK(all.records.size() == 3);
    CHECK(all.dropped == 0);
    CHECK(all.records[1].label == Label::Abnormal);
    CHECK(all.records[1].subject_id == "s2");

    DatasetManifest two{{m.entries[0], m.entries[1]}};
    const auto part = join_manifest(recs, two);
    CHECK(part.records.size() == 2);
    CHECK(part.dropped == 1);

    std::istringstream dup(
        "record_id,path,label,quality,subject_id\n"
        "a,a.wav,normal,good,s1\n"
        "a,b.wav,abnormal,good,s2\n");
    CHECK_THROWS_AS(parse_manifest(dup), ManifestError);

    DatasetManifest dupm{{m.entries[0], m.entries[0]}};
    CHECK_THROWS_AS(join_manifest(recs, dupm), ManifestError);
}

TEST_CASE("load_dataset resamples to the canonical rate in manifest order") {
    const auto dir = std::filesystem::temp_directory_path() / "ausc_pcg_io_ds";
    std::filesystem::create_directories(dir);
    PcgRecording r{"one", "", std::vector<double>(4000, 0.25), 4000};
    write_wav(dir / "one.wav", r);
    r.id = "two";
    r.sample_rate = 2000;
    write_wav(dir / "two.wav", r);
    std::istringstream in(
        "record_id,path,label,quality,subject_id\n"
        "two,two.wav,abnormal,good,p\n"
        "one,one.wav,normal,poor,q\n");
    const auto recs = load_dataset(parse_manifest(in), dir);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].id == "two");
    CHECK(recs[0].samples.size() == 4000);
    CHECK(recs[1].samples.size() == 2000);
    CHECK(recs[1].sample_rate == kCanonicalRate);
    CHECK(recs[1].quality == Quality::Poor);
    std::filesystem::remove_all(dir);
}
