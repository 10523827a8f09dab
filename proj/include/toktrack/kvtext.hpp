// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace toktrack {

// Strict scalar parsers: the whole value must be consumed. The key names
// the offending entry in the ConfigError message.
int parse_int(const std::string& v, const std::string& key);
std::uint64_t parse_u64(const std::string& v, const std::string& key);
double parse_double(const std::string& v, const std::string& key);
bool parse_bool(const std::string& v, const std::string& key);

// Shortest decimal form that round-trips a double.
std::string fmt_double(double v);

// Flat "key = value" lines. '#' starts a comment, blank lines are skipped,
// whitespace around key and value is trimmed, duplicate keys are rejected.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

// Sorted "key = value\n" lines; parse_kv_text inverts it.
std::string format_kv_text(const std::map<std::string, std::string>& kv);

} // namespace toktrack
