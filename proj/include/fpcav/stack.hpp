#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace fpcav
{
// Non-dispersive, lossless dielectric.
struct Material
{
    std::string name;
    double refractive_index = 1.0;

    friend bool operator==(const Material &, const Material &) = default;
};

struct Layer
{
    Material material;
    double thickness_nm = 0.0;

    friend bool operator==(const Layer &, const Layer &) = default;
};

// Light enters from `incident`, crosses layers[0], layers[1], ... and leaves into `exit`.
struct LayerStack
{
    Material incident;
    std::vector<Layer> layers;
    Material exit;

    double total_thickness_nm() const
    {
        double sum = 0.0;
        for (const auto &l : layers)
            sum += l.thickness_nm;
        return sum;
    }

    friend bool operator==(const LayerStack &, const LayerStack &) = default;
};

inline void validate(const Material &m)
{
    if (!std::isfinite(m.refractive_index) || m.refractive_index < 1.0)
        throw invalid_argument("material '" + m.name + "': refractive index must be finite and >= 1");
}

inline void validate(const Layer &l)
{
    validate(l.material);
    if (!std::isfinite(l.thickness_nm) || l.thickness_nm < 0.0)
        throw invalid_argument("layer of '" + l.material.name + "': thickness must be finite and >= 0");
}

inline void validate(const LayerStack &s)
{
    validate(s.incident);
    validate(s.exit);
    for (const auto &l : s.layers)
        validate(l);
}

// Name -> material lookup with unique names.
class MaterialRegistry
{
public:
    MaterialRegistry() = default;

    void add(Material m)
    {
        validate(m);
        if (materials_.contains(m.name))
            throw invalid_argument("duplicate material name '" + m.name + "'");
        std::string key = m.name;
        materials_.emplace(std::move(key), std::move(m));
    }

    // Adds or replaces.
    void set(Material m)
    {
        validate(m);
        std::string key = m.name;
        materials_[std::move(key)] = std::move(m);
    }

    bool contains(const std::string &name) const { return materials_.contains(name); }

    const Material &at(const std::string &name) const
    {
        auto it = materials_.find(name);
        if (it == materials_.end())
            throw invalid_argument("unknown material '" + name + "'");
        return it->second;
    }

    const std::map<std::string, Material> &all() const { return materials_; }

private:
    std::map<std::string, Material> materials_;
};

namespace materials
{
inline Material air() { return {"air", 1.0}; }
inline Material sio2() { return {"SiO2", 1.46}; }
inline Material ta2o5() { return {"Ta2O5", 2.11}; }
inline Material diamond() { return {"diamond", 2.41}; }
inline Material silica() { return {"silica", 1.46}; }

inline MaterialRegistry standard_registry()
{
    MaterialRegistry r;
    for (auto m : {air(), sio2(), ta2o5(), diamond(), silica()})
        r.add(std::move(m));
    return r;
}
} // namespace materials

// Quarter-wave Bragg mirror, `high` layer first (cavity side). The incident medium
// defaults to air; assemble_cavity() replaces it with the medium the mirror faces.
inline LayerStack build_quarter_wave_dbr(double center_wavelength_nm, int pair_count, const Material &high,
                                         const Material &low, const Material &exit,
                                         const Material &incident = materials::air())
{
    if (!(center_wavelength_nm > 0.0) || !std::isfinite(center_wavelength_nm))
        throw invalid_argument("DBR center wavelength must be positive");
    if (pair_count < 0)
        throw invalid_argument("DBR pair count must be >= 0");
    validate(high);
    validate(low);

    LayerStack s{incident, {}, exit};
    s.layers.reserve(2 * static_cast<std::size_t>(pair_count));
    for (int i = 0; i < pair_count; ++i)
    {
        s.layers.push_back({high, center_wavelength_nm / (4.0 * high.refractive_index)});
        s.layers.push_back({low, center_wavelength_nm / (4.0 * low.refractive_index)});
    }
    validate(s);
    return s;
}

// Planar membrane on the bottom mirror, air gap, curved top mirror (treated as planar
// in 1-D). Both mirror stacks list their layers cavity side first.
struct CavityAssembly
{
    LayerStack bottom_mirror; // incident = membrane material, exit = substrate
    double membrane_thickness_nm = 0.0;
    double air_gap_nm = 0.0;
    LayerStack top_mirror;    // incident = gap medium, exit = top substrate
    Material membrane = materials::diamond();
    Material gap = materials::air();

    // Index of the membrane layer in the flattened stack.
    std::size_t membrane_index() const { return bottom_mirror.layers.size(); }
    std::size_t gap_index() const { return bottom_mirror.layers.size() + 1; }

    friend bool operator==(const CavityAssembly &, const CavityAssembly &) = default;
};

inline CavityAssembly assemble_cavity(LayerStack bottom, double membrane_thickness_nm, double air_gap_nm,
                                      LayerStack top, const Material &membrane = materials::diamond(),
                                      const Material &gap = materials::air())
{
    if (!std::isfinite(membrane_thickness_nm) || membrane_thickness_nm < 0.0)
        throw invalid_argument("membrane thickness must be >= 0");
    if (!std::isfinite(air_gap_nm) || air_gap_nm < 0.0)
        throw invalid_argument("air gap must be >= 0");
    validate(membrane);
    validate(gap);
    bottom.incident = membrane;
    top.incident = gap;
    validate(bottom);
    validate(top);
    return {std::move(bottom), membrane_thickness_nm, air_gap_nm, std::move(top), membrane, gap};
}

// Propagation order substrate -> bottom mirror -> membrane -> gap -> top mirror -> exit.
inline LayerStack flatten(const CavityAssembly &c)
{
    LayerStack s;
    s.incident = c.bottom_mirror.exit;
    s.exit = c.top_mirror.exit;
    s.layers.reserve(c.bottom_mirror.layers.size() + c.top_mirror.layers.size() + 2);
    s.layers.insert(s.layers.end(), c.bottom_mirror.layers.rbegin(), c.bottom_mirror.layers.rend());
    s.layers.push_back({c.membrane, c.membrane_thickness_nm});
    s.layers.push_back({c.gap, c.air_gap_nm});
    s.layers.insert(s.layers.end(), c.top_mirror.layers.begin(), c.top_mirror.layers.end());
    return s;
}

// Inverse of flatten(); needs the bottom mirror's layer count to find the membrane.
inline CavityAssembly unflatten(const LayerStack &flat, std::size_t bottom_layer_count)
{
    if (flat.layers.size() < bottom_layer_count + 2)
        throw invalid_argument("flattened stack too short for the given bottom-mirror layer count");
    const auto &membrane = flat.layers[bottom_layer_count];
    const auto &gap = flat.layers[bottom_layer_count + 1];

    CavityAssembly c;
    c.membrane = membrane.material;
    c.gap = gap.material;
    c.membrane_thickness_nm = membrane.thickness_nm;
    c.air_gap_nm = gap.thickness_nm;
    c.bottom_mirror.incident = membrane.material;
    c.bottom_mirror.exit = flat.incident;
    c.bottom_mirror.layers.assign(flat.layers.rbegin() + static_cast<std::ptrdiff_t>(flat.layers.size() - bottom_layer_count),
                                  flat.layers.rend());
    c.top_mirror.incident = gap.material;
    c.top_mirror.exit = flat.exit;
    c.top_mirror.layers.assign(flat.layers.begin() + static_cast<std::ptrdiff_t>(bottom_layer_count + 2),
                               flat.layers.end());
    return c;
}

inline CavityAssembly with_geometry(CavityAssembly c, double membrane_thickness_nm, double air_gap_nm)
{
    c.membrane_thickness_nm = membrane_thickness_nm;
    c.air_gap_nm = air_gap_nm;
    return c;
}

} // namespace fpcav
