#ifndef HARDCL_CONFIG_HPP
#define HARDCL_CONFIG_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hardcl {

// Flat key=value configuration with dotted section prefixes, e.g.
// train.batch_size=64. '#' starts a comment. Unknown and duplicate keys
// are rejected.
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig from_file(const std::string& path);
    static KeyValueConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    long long get_int(const std::string& key, long long def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& def) const;

    // Throws InputError naming the first key not in `allowed`.
    void check_known(std::span<const std::string_view> allowed) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

} // namespace hardcl

#endif
