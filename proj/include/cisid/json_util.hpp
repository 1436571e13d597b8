#pragma once

// Small helpers shared by every file format in the project. All formats are
// strict: unknown keys are rejected so typos in hand-written files fail fast
// instead of silently falling back to defaults.

#include "cisid/math.hpp"

#include <json.hpp>

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace cisid {

using Json = nlohmann::json;

inline void require_keys(const Json& j, const std::string& what,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {})
{
    if (!j.is_object()) {
        throw std::invalid_argument(what + ": expected a JSON object");
    }
    for (const char* key : required) {
        if (!j.contains(key)) {
            throw std::invalid_argument(what + ": missing key '" + key + "'");
        }
    }
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : required) known = known || item.key() == key;
        for (const char* key : optional) known = known || item.key() == key;
        if (!known) {
            throw std::invalid_argument(what + ": unknown key '" + item.key() + "'");
        }
    }
}

inline Vec3 vec3_from_json(const Json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument(what + ": expected an array of 3 numbers");
    }
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Json json_from_vec3(const Vec3& v)
{
    return Json::array({v.x(), v.y(), v.z()});
}

// Quaternions are stored [w, x, y, z].
inline Quat quat_from_json(const Json& j, const std::string& what)
{
    if (!j.is_array() || j.size() != 4) {
        throw std::invalid_argument(what + ": expected an array of 4 numbers [w,x,y,z]");
    }
    Quat q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
    if (std::abs(q.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument(what + ": quaternion must be unit norm");
    }
    q.normalize();
    return q;
}

inline Json json_from_quat(const Quat& q)
{
    return Json::array({q.w(), q.x(), q.y(), q.z()});
}

inline VecX vecx_from_json(const Json& j, const std::string& what)
{
    if (!j.is_array()) {
        throw std::invalid_argument(what + ": expected an array of numbers");
    }
    VecX v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

inline Json json_from_vecx(const VecX& v)
{
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

}  // namespace cisid
