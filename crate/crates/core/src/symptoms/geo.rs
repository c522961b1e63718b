//! Region lookup from tweet coordinates or profile locations.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde_json::Value;

use crate::error::{ensure, Error, Result};

/// A region made of closed lon/lat rings. Holes are just further rings:
/// the even-odd rule over all rings leaves them outside.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPolygon {
    pub region: String,
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl RegionPolygon {
    pub fn new(region: impl Into<String>, rings: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let region = region.into();
        for ring in &rings {
            ensure!(ring.len() >= 4, Data, "ring of {region:?} has fewer than 4 vertices");
            ensure!(
                ring.first() == ring.last(),
                Data,
                "ring of {region:?} is not closed"
            );
        }
        Ok(Self { region, rings })
    }

    /// Even-odd rule across every ring.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let ((x1, y1), (x2, y2)) = (w[0], w[1]);
                if (y1 > lat) != (y2 > lat) {
                    let x_cross = x1 + (lat - y1) * (x2 - x1) / (y2 - y1);
                    if lon < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }
}

pub fn check_coordinates(lon: f64, lat: f64) -> Result<()> {
    ensure!(
        lon.is_finite() && lat.is_finite() && lon.abs() <= 180.0 && lat.abs() <= 90.0,
        Data,
        "malformed coordinates lon={lon} lat={lat}"
    );
    Ok(())
}

pub fn load_geojson(path: &Path, id_property: &str) -> Result<Vec<RegionPolygon>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_geojson(f, id_property)
}

/// Reads Polygon and MultiPolygon features of a FeatureCollection; the
/// region id is the feature's `id_property` property.
pub fn read_geojson(input: impl Read, id_property: &str) -> Result<Vec<RegionPolygon>> {
    let doc: Value = serde_json::from_reader(input)?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Data("GeoJSON has no features array".into()))?;
    let mut out = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let id = match f.pointer(&format!("/properties/{id_property}")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::Data(format!("feature {i} lacks property {id_property:?}"))),
        };
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::Data(format!("feature {i} has no geometry")))?;
        let coords = geom.get("coordinates");
        let polys: Vec<&Value> = match (geom.get("type").and_then(Value::as_str), coords) {
            (Some("Polygon"), Some(c)) => vec![c],
            (Some("MultiPolygon"), Some(Value::Array(ps))) => ps.iter().collect(),
            (t, _) => return Err(Error::Data(format!("feature {i}: unsupported geometry {t:?}"))),
        };
        let mut rings = Vec::new();
        for poly in polys {
            for ring in poly.as_array().into_iter().flatten() {
                rings.push(parse_ring(ring).map_err(|e| Error::Data(format!("feature {i}: {e}")))?);
            }
        }
        out.push(RegionPolygon::new(id, rings)?);
    }
    Ok(out)
}

fn parse_ring(v: &Value) -> std::result::Result<Vec<(f64, f64)>, String> {
    v.as_array()
        .ok_or("ring is not an array")?
        .iter()
        .map(|p| match p.as_array().map(Vec::as_slice) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err("non-numeric vertex".to_string()),
            },
            _ => Err("malformed vertex".to_string()),
        })
        .collect()
}

/// Place name to region id, matched after case folding and whitespace
/// normalization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gazetteer {
    names: HashMap<String, String>,
}

pub fn normalize_place(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, region: impl Into<String>) {
        self.names.insert(normalize_place(name), region.into());
    }

    pub fn lookup(&self, place: &str) -> Option<&str> {
        self.names.get(&normalize_place(place)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(f)
    }

    /// `name<TAB>region` lines; `#` comments and blank lines skipped.
    pub fn read_tsv(input: impl Read) -> Result<Self> {
        let mut g = Self::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("gazetteer line {}: {e}", i + 1)))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, region) = line
                .split_once('\t')
                .ok_or_else(|| Error::Data(format!("gazetteer line {}: expected name<TAB>region", i + 1)))?;
            g.insert(name, region.trim());
        }
        Ok(g)
    }
}

/// Region for a tweet: coordinates first, then the profile location.
pub fn geolocate<'a>(
    point: Option<(f64, f64)>,
    profile_location: Option<&str>,
    polygons: &'a [RegionPolygon],
    gazetteer: &'a Gazetteer,
) -> Result<Option<&'a str>> {
    if let Some((lon, lat)) = point {
        check_coordinates(lon, lat)?;
        if let Some(p) = polygons.iter().find(|p| p.contains(lon, lat)) {
            return Ok(Some(&p.region));
        }
    }
    Ok(profile_location.and_then(|s| gazetteer.lookup(s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, x0: f64, y0: f64, side: f64) -> RegionPolygon {
        RegionPolygon::new(
            id,
            vec![vec![(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side), (x0, y0)]],
        )
        .unwrap()
    }

    #[test]
    fn point_in_square_and_hole() {
        let sq = square("A", 0.0, 0.0, 1.0);
        assert!(sq.contains(0.5, 0.5));
        assert!(!sq.contains(1.5, 0.5));
        let mut donut = square("D", 0.0, 0.0, 4.0);
        donut.rings.push(square("", 1.0, 1.0, 2.0).rings.remove(0));
        assert!(donut.contains(0.5, 0.5));
        assert!(!donut.contains(2.0, 2.0));
    }

    #[test]
    fn concave_polygon() {
        // A "U" shape opening upwards.
        let u = RegionPolygon::new(
            "U",
            vec![vec![(0., 0.), (3., 0.), (3., 3.), (2., 3.), (2., 1.), (1., 1.), (1., 3.), (0., 3.), (0., 0.)]],
        )
        .unwrap();
        assert!(u.contains(0.5, 2.0));
        assert!(u.contains(2.5, 2.0));
        assert!(!u.contains(1.5, 2.0));
        assert!(u.contains(1.5, 0.5));
    }

    #[test]
    fn unclosed_ring_rejected() {
        assert!(RegionPolygon::new("x", vec![vec![(0., 0.), (1., 0.), (1., 1.), (0., 1.)]]).is_err());
    }

    #[test]
    fn lookup_order() {
        let polys = vec![square("A", 0.0, 0.0, 1.0)];
        let mut g = Gazetteer::new();
        g.insert("London", "LON");
        assert_eq!(geolocate(Some((0.5, 0.5)), None, &polys, &g).unwrap(), Some("A"));
        assert_eq!(geolocate(Some((5.0, 5.0)), Some("  london "), &polys, &g).unwrap(), Some("LON"));
        assert_eq!(geolocate(Some((5.0, 5.0)), Some(""), &polys, &g).unwrap(), None);
        assert_eq!(geolocate(None, None, &polys, &g).unwrap(), None);
        assert!(geolocate(Some((0.0, 91.0)), None, &polys, &g).is_err());
        assert!(geolocate(Some((181.0, 0.0)), None, &polys, &g).is_err());
    }

    #[test]
    fn geojson_and_tsv() {
        let gj = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"id":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
            {"type":"Feature","properties":{"id":7},"geometry":{"type":"MultiPolygon","coordinates":[[[[5,5],[6,5],[6,6],[5,6],[5,5]]],[[[8,8],[9,8],[9,9],[8,9],[8,8]]]]}}
        ]}"#;
        let polys = read_geojson(gj.as_bytes(), "id").unwrap();
        assert_eq!(polys.len(), 2);
        assert!(polys[1].contains(8.5, 8.5));
        assert_eq!(polys[1].region, "7");
        assert!(read_geojson(gj.as_bytes(), "name").is_err());

        let g = Gazetteer::read_tsv("# name\tregion\nNew  York\tNY\n".as_bytes()).unwrap();
        assert_eq!(g.lookup("new york"), Some("NY"));
        assert!(Gazetteer::read_tsv("bad line\n".as_bytes()).is_err());
    }
}
