#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace logan {

// Incremental SHA-256, hex-encoded on finish().
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::byte> bytes);
    void update(std::string_view text);

    template <typename T>
    void update_values(std::span<const T> values) {
        update(std::as_bytes(values));
    }

    std::string finish();

private:
    struct State;
    std::unique_ptr<State> state_;
};

std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);

} // namespace logan
