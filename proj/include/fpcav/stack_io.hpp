#pragma once

// Stack-definition documents (JSON):
//
//   { "incident": "air", "exit": "silica",
//     "materials": [ {"name": "Ta2O5", "n": 2.11}, ... ],
//     "layers": [ {"material": "Ta2O5", "thickness_nm": 74.05},
//                 {"dbr": {"center_nm": 625, "pairs": 15, "high": "Ta2O5", "low": "SiO2"}} ] }
//
// layers[0] is struck first by the incident light. A "dbr" entry expands in place to
// 2*pairs quarter-wave layers, high index first. Materials listed in the document
// extend (and may override) the registry passed to the parser.

#include <istream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "stack.hpp"

namespace fpcav::io
{
namespace detail
{
template <class T>
T required(const nlohmann::json &j, const char *key, const char *context)
{
    if (!j.is_object() || !j.contains(key))
        throw format_error(std::string(context) + ": missing key '" + key + "'");
    try
    {
        return j.at(key).get<T>();
    }
    catch (const nlohmann::json::exception &e)
    {
        throw format_error(std::string(context) + ": bad value for '" + key + "': " + e.what());
    }
}
} // namespace detail

inline MaterialRegistry registry_from_json(const nlohmann::json &doc, MaterialRegistry base)
{
    if (!doc.contains("materials"))
        return base;
    const auto &list = doc.at("materials");
    if (!list.is_array())
        throw format_error("'materials' must be an array");
    for (const auto &m : list)
    {
        Material mat{detail::required<std::string>(m, "name", "material"), detail::required<double>(m, "n", "material")};
        try
        {
            base.set(mat);
        }
        catch (const invalid_argument &e)
        {
            throw format_error(e.what());
        }
    }
    return base;
}

inline LayerStack stack_from_json(const nlohmann::json &doc,
                                  const MaterialRegistry &base = materials::standard_registry())
{
    if (!doc.is_object())
        throw format_error("stack document must be a JSON object");
    const MaterialRegistry reg = registry_from_json(doc, base);
    auto lookup = [&](const std::string &name) -> const Material & {
        if (!reg.contains(name))
            throw format_error("unknown material '" + name + "'");
        return reg.at(name);
    };

    LayerStack s;
    s.incident = lookup(detail::required<std::string>(doc, "incident", "stack"));
    s.exit = lookup(detail::required<std::string>(doc, "exit", "stack"));
    if (doc.contains("layers"))
    {
        const auto &layers = doc.at("layers");
        if (!layers.is_array())
            throw format_error("'layers' must be an array");
        for (const auto &entry : layers)
        {
            if (entry.is_object() && entry.contains("dbr"))
            {
                const auto &d = entry.at("dbr");
                LayerStack dbr;
                try
                {
                    dbr = build_quarter_wave_dbr(detail::required<double>(d, "center_nm", "dbr"),
                                                 detail::required<int>(d, "pairs", "dbr"),
                                                 lookup(detail::required<std::string>(d, "high", "dbr")),
                                                 lookup(detail::required<std::string>(d, "low", "dbr")), s.exit);
                }
                catch (const invalid_argument &e)
                {
                    throw format_error(std::string("dbr block: ") + e.what());
                }
                s.layers.insert(s.layers.end(), dbr.layers.begin(), dbr.layers.end());
                continue;
            }
            Layer l{lookup(detail::required<std::string>(entry, "material", "layer")),
                    detail::required<double>(entry, "thickness_nm", "layer")};
            s.layers.push_back(l);
        }
    }
    try
    {
        validate(s);
    }
    catch (const invalid_argument &e)
    {
        throw format_error(e.what());
    }
    return s;
}

inline LayerStack read_stack(std::istream &in, const MaterialRegistry &base = materials::standard_registry())
{
    nlohmann::json doc;
    try
    {
        in >> doc;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw format_error(std::string("stack document is not valid JSON: ") + e.what());
    }
    return stack_from_json(doc, base);
}

// Explicit form: every layer listed, every referenced material declared.
inline nlohmann::ordered_json stack_to_json(const LayerStack &s)
{
    nlohmann::ordered_json doc;
    doc["incident"] = s.incident.name;
    doc["exit"] = s.exit.name;

    MaterialRegistry used;
    auto note = [&](const Material &m) {
        if (!used.contains(m.name))
            used.add(m);
        else if (!(used.at(m.name) == m))
            throw invalid_argument("material name '" + m.name + "' used with two different indices");
    };
    note(s.incident);
    note(s.exit);
    for (const auto &l : s.layers)
        note(l.material);

    auto mats = nlohmann::ordered_json::array();
    for (const auto &[name, m] : used.all())
        mats.push_back({{"name", name}, {"n", m.refractive_index}});
    doc["materials"] = mats;

    auto layers = nlohmann::ordered_json::array();
    for (const auto &l : s.layers)
        layers.push_back({{"material", l.material.name}, {"thickness_nm", l.thickness_nm}});
    doc["layers"] = layers;
    return doc;
}

} // namespace fpcav::io
