#include "hardcl/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hardcl/errors.hpp"
#include "hardcl/format.hpp"

namespace hardcl {

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return from_string(buf.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string_view::npos)
            throw InputError("config: line " + std::to_string(lineno) + " is not key=value");
        std::string key(trim(s.substr(0, eq)));
        std::string value(trim(s.substr(eq + 1)));
        if (key.empty()) throw InputError("config: empty key at line " + std::to_string(lineno));
        if (cfg.entries_.count(key))
            throw InputError("config: duplicate key '" + key + "'");
        cfg.entries_[key] = value;
    }
    return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& def) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        return parse_double(it->second);
    } catch (const InputError&) {
        throw InputError("config: key '" + key + "' is not a number: '" + it->second + "'");
    }
}

long long KeyValueConfig::get_int(const std::string& key, long long def) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        return parse_int(it->second);
    } catch (const InputError&) {
        throw InputError("config: key '" + key + "' is not an integer: '" + it->second + "'");
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t def) const {
    long long v = get_int(key, static_cast<long long>(def));
    if (v < 0) throw InputError("config: key '" + key + "' must be nonnegative");
    return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InputError("config: key '" + key + "' is not a boolean: '" + it->second + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& def) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    std::vector<std::string> out;
    for (auto part : split(it->second, ',')) {
        auto t = trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    if (out.empty()) throw InputError("config: key '" + key + "' has an empty list");
    return out;
}

void KeyValueConfig::check_known(std::span<const std::string_view> allowed) const {
    for (const auto& [key, value] : entries_) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw InputError("config: unknown key '" + key + "'");
    }
}

} // namespace hardcl
