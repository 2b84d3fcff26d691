#pragma once

// Flat `key = value` text used for run configuration files and for the
// settings block stored in checkpoints. Lines starting with '#' are comments.
// Keys are the field names of Hyperparams, MfccConfig and (prefixed with
// "arch.") Architecture.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "ausc/features.hpp"
#include "ausc/hyperparams.hpp"
#include "ausc/network.hpp"

namespace ausc {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(std::ostream& out, const KeyValues& kv);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Each assign_* returns false when the key does not belong to that struct
// and throws ConfigError when the value does not parse.
bool assign(Hyperparams& h, const std::string& key, const std::string& value);
bool assign(MfccConfig& c, const std::string& key, const std::string& value);
bool assign(Architecture& a, const std::string& key, const std::string& value);

KeyValues to_key_values(const Hyperparams& h);
KeyValues to_key_values(const MfccConfig& c);
KeyValues to_key_values(const Architecture& a);

}  // namespace ausc
