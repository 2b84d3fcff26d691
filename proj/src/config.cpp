#include "ausc/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "ausc/error.hpp"
#include "ausc/text.hpp"

namespace ausc {

namespace {

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
    N out{};
    const auto v = text::trim(value);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("cannot parse value '" + value + "' for " + key);
    }
    return out;
}

template <typename N>
std::string format_uint(N v) {
    return std::to_string(v);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
        kv[text::trim(t.substr(0, eq))] = text::trim(t.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_key_values(in);
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

bool assign(Hyperparams& h, const std::string& key, const std::string& value) {
    if (key == "learning_rate") h.learning_rate = parse_number<double>(key, value);
    else if (key == "lambda") h.lambda = parse_number<double>(key, value);
    else if (key == "keep_prob") h.keep_prob = parse_number<double>(key, value);
    else if (key == "batch_size") h.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "max_epochs") h.max_epochs = parse_number<std::size_t>(key, value);
    else if (key == "patience") h.patience = parse_number<std::size_t>(key, value);
    else if (key == "seed") h.seed = parse_number<std::uint64_t>(key, value);
    else return false;
    return true;
}

bool assign(MfccConfig& c, const std::string& key, const std::string& value) {
    if (key == "segment_seconds") c.segment_seconds = parse_number<double>(key, value);
    else if (key == "window_length") c.window_length = parse_number<double>(key, value);
    else if (key == "step") c.step = parse_number<double>(key, value);
    else if (key == "dft_length") c.dft_length = parse_number<std::size_t>(key, value);
    else if (key == "filter_count") c.filter_count = parse_number<std::size_t>(key, value);
    else if (key == "kept_coefficients") c.kept_coefficients = parse_number<std::size_t>(key, value);
    else if (key == "first_coefficient") c.first_coefficient = parse_number<std::size_t>(key, value);
    else if (key == "freq_low") c.freq_low = parse_number<double>(key, value);
    else if (key == "freq_high") c.freq_high = parse_number<double>(key, value);
    else return false;
    return true;
}

bool assign(Architecture& a, const std::string& key, const std::string& value) {
    std::size_t* slot = nullptr;
    if (key == "arch.in_h") slot = &a.in_h;
    else if (key == "arch.in_w") slot = &a.in_w;
    else if (key == "arch.conv1_channels") slot = &a.conv1_channels;
    else if (key == "arch.conv1_kh") slot = &a.conv1_kh;
    else if (key == "arch.conv1_kw") slot = &a.conv1_kw;
    else if (key == "arch.pool1_ph") slot = &a.pool1.ph;
    else if (key == "arch.pool1_pw") slot = &a.pool1.pw;
    else if (key == "arch.pool1_sh") slot = &a.pool1.sh;
    else if (key == "arch.pool1_sw") slot = &a.pool1.sw;
    else if (key == "arch.conv2_channels") slot = &a.conv2_channels;
    else if (key == "arch.conv2_kh") slot = &a.conv2_kh;
    else if (key == "arch.conv2_kw") slot = &a.conv2_kw;
    else if (key == "arch.pool2_ph") slot = &a.pool2.ph;
    else if (key == "arch.pool2_pw") slot = &a.pool2.pw;
    else if (key == "arch.pool2_sh") slot = &a.pool2.sh;
    else if (key == "arch.pool2_sw") slot = &a.pool2.sw;
    else if (key == "arch.fc1_units") slot = &a.fc1_units;
    else if (key == "arch.fc2_units") slot = &a.fc2_units;
    else if (key == "arch.classes") slot = &a.classes;
    if (!slot) return false;
    *slot = parse_number<std::size_t>(key, value);
    return true;
}

KeyValues to_key_values(const Hyperparams& h) {
    return {
        {"learning_rate", format_double(h.learning_rate)},
        {"lambda", format_double(h.lambda)},
        {"keep_prob", format_double(h.keep_prob)},
        {"batch_size", format_uint(h.batch_size)},
        {"max_epochs", format_uint(h.max_epochs)},
        {"patience", format_uint(h.patience)},
        {"seed", format_uint(h.seed)},
    };
}

KeyValues to_key_values(const MfccConfig& c) {
    return {
        {"segment_seconds", format_double(c.segment_seconds)},
        {"window_length", format_double(c.window_length)},
        {"step", format_double(c.step)},
        {"dft_length", format_uint(c.dft_length)},
        {"filter_count", format_uint(c.filter_count)},
        {"kept_coefficients", format_uint(c.kept_coefficients)},
        {"first_coefficient", format_uint(c.first_coefficient)},
        {"freq_low", format_double(c.freq_low)},
        {"freq_high", format_double(c.freq_high)},
    };
}

KeyValues to_key_values(const Architecture& a) {
    return {
        {"arch.in_h", format_uint(a.in_h)},
        {"arch.in_w", format_uint(a.in_w)},
        {"arch.conv1_channels", format_uint(a.conv1_channels)},
        {"arch.conv1_kh", format_uint(a.conv1_kh)},
        {"arch.conv1_kw", format_uint(a.conv1_kw)},
        {"arch.pool1_ph", format_uint(a.pool1.ph)},
        {"arch.pool1_pw", format_uint(a.pool1.pw)},
        {"arch.pool1_sh", format_uint(a.pool1.sh)},
        {"arch.pool1_sw", format_uint(a.pool1.sw)},
        {"arch.conv2_channels", format_uint(a.conv2_channels)},
        {"arch.conv2_kh", format_uint(a.conv2_kh)},
        {"arch.conv2_kw", format_uint(a.conv2_kw)},
        {"arch.pool2_ph", format_uint(a.pool2.ph)},
        {"arch.pool2_pw", format_uint(a.pool2.pw)},
        {"arch.pool2_sh", format_uint(a.pool2.sh)},
        {"arch.pool2_sw", format_uint(a.pool2.sw)},
        {"arch.fc1_units", format_uint(a.fc1_units)},
        {"arch.fc2_units", format_uint(a.fc2_units)},
        {"arch.classes", format_uint(a.classes)},
    };
}

}  // namespace ausc
