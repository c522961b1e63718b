//! Routes tweets to regions by coordinates, then by profile location.

use epifuse::symptoms::{geolocate, read_geojson, Gazetteer};

const REGIONS: &str = r#"{"type":"FeatureCollection","features":[
  {"type":"Feature","properties":{"code":"NORTH"},"geometry":{"type":"Polygon",
    "coordinates":[[[-3,54],[0,54],[0,56],[-3,56],[-3,54]]]}},
  {"type":"Feature","properties":{"code":"SOUTH"},"geometry":{"type":"MultiPolygon",
    "coordinates":[[[[-3,50],[0,50],[0,52],[-3,52],[-3,50]],[[-2,50.5],[-1,50.5],[-1,51],[-2,51],[-2,50.5]]]]}}
]}"#;

fn main() -> epifuse::Result<()> {
    let polygons = read_geojson(REGIONS.as_bytes(), "code")?;
    let mut gazetteer = Gazetteer::new();
    gazetteer.insert("Newcastle upon Tyne", "NORTH");
    gazetteer.insert("Southampton", "SOUTH");

    let tweets = [
        (Some((-1.5, 55.0)), None),
        (Some((-2.5, 51.5)), None),
        (Some((-1.5, 50.7)), Some("southampton")),
        (None, Some("  NEWCASTLE upon tyne ")),
        (None, Some("somewhere else")),
        (Some((200.0, 0.0)), None),
    ];
    for (point, profile) in tweets {
        match geolocate(point, profile, &polygons, &gazetteer) {
            Ok(region) => println!("{point:?} {profile:?} -> {region:?}"),
            Err(e) => println!("{point:?} {profile:?} -> error: {e}"),
        }
    }
    Ok(())
}
