// "AUSC" checkpoint: magic, u16 version, the ten named tensors in fixed order
// (u16 name length, name, u8 rank, u32 extents, f32 data), normalization
// stats (u32 rows, f64 means, f64 stds), then a u32-length settings block of
// `key = value` lines holding hyper-parameters, MFCC config and architecture.

#include <fstream>
#include <sstream>

#include "ausc/binio.hpp"
#include "ausc/config.hpp"
#include "ausc/network.hpp"

namespace ausc {

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;

KeyValues settings_of(const NetworkParams<float>& p) {
    KeyValues kv = to_key_values(p.hyper);
    kv.merge(to_key_values(p.mfcc));
    kv.merge(to_key_values(p.arch));
    return kv;
}

}  // namespace

void write_checkpoint(std::ostream& out, const NetworkParams<float>& params) {
    binio::put_magic(out, "AUSC");
    binio::put_uint<std::uint16_t>(out, kCheckpointVersion);
    params.tensors.for_each([&](std::string_view name, const Tensor<float>& t, bool) {
        binio::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        binio::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
        for (auto d : t.shape()) binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (float v : t.vec()) binio::put_f32(out, v);
    });

    const auto& n = params.norm;
    if (n.mean.size() != n.std.size()) throw CheckpointError("normalization stats have mismatched lengths");
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(n.mean.size()));
    for (double v : n.mean) binio::put_f64(out, v);
    for (double v : n.std) binio::put_f64(out, v);

    std::ostringstream block;
    write_key_values(block, settings_of(params));
    const auto text = block.str();
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw CheckpointError("failed writing checkpoint");
}

NetworkParams<float> read_checkpoint(std::istream& in) {
    try {
        binio::expect_magic(in, "AUSC");
        const auto version = binio::get_uint<std::uint16_t>(in);
        if (version != kCheckpointVersion) {
            throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
        }
        NetworkParams<float> p;
        p.tensors.for_each([&](std::string_view want, Tensor<float>& t, bool) {
            const auto name = binio::get_bytes(in, binio::get_uint<std::uint16_t>(in));
            if (name != want) throw CheckpointError("expected tensor " + std::string(want) + ", found " + name);
            Shape shape(binio::get_uint<std::uint8_t>(in));
            for (auto& d : shape) d = binio::get_uint<std::uint32_t>(in);
            std::vector<float> data(shape_size(shape));
            for (auto& v : data) v = binio::get_f32(in);
            t = Tensor<float>(std::move(shape), std::move(data));
        });

        const auto rows = binio::get_uint<std::uint32_t>(in);
        p.norm.mean.resize(rows);
        p.norm.std.resize(rows);
        for (auto& v : p.norm.mean) v = binio::get_f64(in);
        for (auto& v : p.norm.std) v = binio::get_f64(in);

        std::istringstream block(binio::get_bytes(in, binio::get_uint<std::uint32_t>(in)));
        for (const auto& [k, v] : parse_key_values(block)) {
            if (!assign(p.hyper, k, v) && !assign(p.mfcc, k, v) && !assign(p.arch, k, v)) {
                throw CheckpointError("unknown checkpoint setting " + k);
            }
        }

        const auto expect = ParamTensors<float>::zeros(p.arch);
        for (const auto& e : ParamTensors<float>::entries) {
            require_shape((p.tensors.*e.member).shape(), (expect.*e.member).shape(), std::string(e.name).c_str());
        }
        return p;
    } catch (const CheckpointError&) {
        throw;
    } catch (const Error& e) {
        throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams<float>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path.string());
    write_checkpoint(out, params);
}

NetworkParams<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace ausc
