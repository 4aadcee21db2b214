use crate::tx::LatLon;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub name: &'static str,
    pub lat: f64,
    pub lon: f64,
    /// Share of account homes.
    pub weight: f64,
}

impl Region {
    pub fn coords(&self) -> LatLon {
        LatLon { lat: self.lat, lon: self.lon }
    }
}

/// Region table; the index is the region code.
pub const REGIONS: [Region; 12] = [
    Region { name: "london", lat: 51.507, lon: -0.128, weight: 0.22 },
    Region { name: "frankfurt", lat: 50.110, lon: 8.682, weight: 0.18 },
    Region { name: "new-york", lat: 40.713, lon: -74.006, weight: 0.15 },
    Region { name: "toronto", lat: 43.653, lon: -79.383, weight: 0.08 },
    Region { name: "singapore", lat: 1.352, lon: 103.820, weight: 0.07 },
    Region { name: "tokyo", lat: 35.676, lon: 139.650, weight: 0.07 },
    Region { name: "dubai", lat: 25.205, lon: 55.271, weight: 0.06 },
    Region { name: "mumbai", lat: 19.076, lon: 72.878, weight: 0.06 },
    Region { name: "sao-paulo", lat: -23.551, lon: -46.633, weight: 0.04 },
    Region { name: "johannesburg", lat: -26.204, lon: 28.047, weight: 0.03 },
    Region { name: "lagos", lat: 6.524, lon: 3.379, weight: 0.02 },
    Region { name: "sydney", lat: -33.869, lon: 151.209, weight: 0.02 },
];
