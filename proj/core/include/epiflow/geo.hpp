#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epiflow::geo {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
    double lat = 0;
    double lon = 0;
};

// Great-circle (haversine) distance in kilometres.
double geodesic_distance_km(LatLon a, LatLon b);

struct CampRecord {
    std::string camp_id;
    LatLon position;
    // month key (year*12 + month-1) -> average troop strength
    std::map<std::int64_t, double> monthly_strength;
};

// Mean strength over the months of the window that have data (July to
// September 1918 for the instrument).
double camp_strength(const CampRecord& camp, std::int64_t first_month_key,
                     std::int64_t last_month_key);

struct CampExposure {
    std::string camp_id;
    double strength = 0;
    LatLon position;
};

struct InstrumentValue {
    std::string location_id;
    double z = 0;
};

struct InstrumentDiagnostics {
    std::vector<std::string> zero_strength_camps;  // excluded with warning
};

// z = sum_j [ln(strength_j) - ln(dist_j)], distances in km. A camp at zero
// distance is an error naming the camp; zero-strength camps are excluded.
InstrumentValue instrument_z(const std::string& location_id, LatLon location,
                             const std::vector<CampExposure>& camps,
                             InstrumentDiagnostics* diag = nullptr);

}  // namespace epiflow::geo
