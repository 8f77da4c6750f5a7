#pragma once

// Model checkpoint container.
//
//   "GASNET1\0"  8-byte magic
//   version u32, record count u32
//   records, each: kind u8, role (u32 length + UTF-8), payload
//     kind 0 network: layer count u32, sizes u32[], parameter count u64,
//                     parameters f64[], has_optimizer u8, and when set:
//                     lr, beta1, beta2, eps, weight_decay, grad_clip f64,
//                     step u64, first moment f64[], second moment f64[]
//     kind 1 array:   count u64, values f64[]
//     kind 2 text:    u32 length + UTF-8
//
// Records are written in role order, so equal content gives equal bytes.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gas/binary.hpp"
#include "gas/nn.hpp"

namespace gas {

inline constexpr char kCheckpointMagic[] = "GASNET1";  // 7 chars + the terminating NUL
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NetworkRecord {
    Mlp net;
    std::optional<OptimState> optimizer;
};

struct Checkpoint {
    std::map<std::string, NetworkRecord> networks;
    std::map<std::string, std::vector<double>> arrays;
    std::map<std::string, std::string> texts;

    const NetworkRecord& network(const std::string& role) const {
        auto it = networks.find(role);
        if (it == networks.end()) throw SchemaError("checkpoint has no network with role '" + role + "'");
        return it->second;
    }
    const std::vector<double>& array(const std::string& role) const {
        auto it = arrays.find(role);
        if (it == arrays.end()) throw SchemaError("checkpoint has no array '" + role + "'");
        return it->second;
    }
    double scalar(const std::string& role) const {
        const auto& values = array(role);
        if (values.size() != 1) throw SchemaError("checkpoint entry '" + role + "' is not a scalar");
        return values[0];
    }
    const std::string& text(const std::string& role) const {
        auto it = texts.find(role);
        if (it == texts.end()) throw SchemaError("checkpoint has no text '" + role + "'");
        return it->second;
    }
};

namespace detail {

inline void write_vec(io::Writer& w, const Vec& v) { w.f64s(v.data(), static_cast<std::size_t>(v.size())); }

inline Vec read_vec(io::Reader& r, std::uint64_t n) {
    Vec v(static_cast<Eigen::Index>(n));
    r.f64s(v.data(), static_cast<std::size_t>(n));
    return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    io::Writer w(path);
    w.bytes(kCheckpointMagic, 8);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.networks.size() + ckpt.arrays.size() + ckpt.texts.size()));
    for (const auto& [role, rec] : ckpt.networks) {
        w.u8(0);
        w.string(role);
        w.u32(static_cast<std::uint32_t>(rec.net.sizes().size()));
        for (int s : rec.net.sizes()) w.u32(static_cast<std::uint32_t>(s));
        w.u64(static_cast<std::uint64_t>(rec.net.parameter_count()));
        detail::write_vec(w, rec.net.params());
        w.u8(rec.optimizer ? 1 : 0);
        if (rec.optimizer) {
            const OptimState& o = *rec.optimizer;
            for (double h : {o.hyper.learning_rate, o.hyper.beta1, o.hyper.beta2, o.hyper.eps, o.hyper.weight_decay,
                             o.hyper.grad_clip_norm})
                w.f64(h);
            w.u64(static_cast<std::uint64_t>(o.step));
            detail::write_vec(w, o.first_moment);
            detail::write_vec(w, o.second_moment);
        }
    }
    for (const auto& [role, values] : ckpt.arrays) {
        w.u8(1);
        w.string(role);
        w.u64(values.size());
        w.f64s(values.data(), values.size());
    }
    for (const auto& [role, value] : ckpt.texts) {
        w.u8(2);
        w.string(role);
        w.string(value);
    }
    w.close();
}

inline Checkpoint load_checkpoint(const std::string& path) {
    io::Reader r(path);
    r.magic(std::string(kCheckpointMagic, 8));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) throw VersionError("checkpoint '" + path + "'", version, kCheckpointVersion);
    const std::uint32_t count = r.u32();
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t kind = r.u8();
        std::string role = r.string(4096);
        switch (kind) {
            case 0: {
                const std::uint32_t n_sizes = r.u32();
                if (n_sizes < 2 || n_sizes > 1024) throw SchemaError("checkpoint '" + path + "': bad layer count");
                std::vector<int> sizes;
                for (std::uint32_t k = 0; k < n_sizes; ++k) sizes.push_back(static_cast<int>(r.u32()));
                NetworkRecord rec{Mlp(sizes), std::nullopt};
                const std::uint64_t n = r.u64();
                if (n != static_cast<std::uint64_t>(rec.net.parameter_count()))
                    throw SchemaError("checkpoint '" + path + "': parameter count does not match layer sizes");
                rec.net.params() = detail::read_vec(r, n);
                if (r.u8()) {
                    OptimState o;
                    o.hyper.learning_rate = r.f64();
                    o.hyper.beta1 = r.f64();
                    o.hyper.beta2 = r.f64();
                    o.hyper.eps = r.f64();
                    o.hyper.weight_decay = r.f64();
                    o.hyper.grad_clip_norm = r.f64();
                    o.step = static_cast<long long>(r.u64());
                    o.first_moment = detail::read_vec(r, n);
                    o.second_moment = detail::read_vec(r, n);
                    rec.optimizer = std::move(o);
                }
                ckpt.networks.emplace(std::move(role), std::move(rec));
                break;
            }
            case 1: {
                const std::uint64_t n = r.u64();
                if (n > (1ull << 32)) throw SchemaError("checkpoint '" + path + "': implausible array length");
                std::vector<double> values(n);
                r.f64s(values.data(), n);
                ckpt.arrays.emplace(std::move(role), std::move(values));
                break;
            }
            case 2:
                ckpt.texts.emplace(std::move(role), r.string());
                break;
            default:
                throw SchemaError("checkpoint '" + path + "': unknown record kind " + std::to_string(kind));
        }
    }
    if (!r.at_end()) throw SchemaError("checkpoint '" + path + "' has trailing bytes");
    return ckpt;
}

}  // namespace gas
