//! GeoJSON export of location results.

use geohin_core::cluster::{ClusterModel, Modality};
use geohin_core::hetnet::NodeId;
use serde_json::{json, Value};

/// A FeatureCollection with one Point per location result, placed at the
/// cluster centre. Non-location rows and unknown clusters are skipped.
pub fn location_features(results: &[(NodeId, f64)], space_model: &ClusterModel) -> Value {
    let features: Vec<Value> = if space_model.modality != Modality::Space {
        Vec::new()
    } else {
        results
            .iter()
            .enumerate()
            .filter_map(|(i, (node, score))| {
                let idx = match node {
                    NodeId::Location(l) => *l as usize,
                    _ => return None,
                };
                let mode = space_model.modes.get(idx)?;
                let (lat, lon) = (mode.center[0], mode.center[1]);
                Some(json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [lon, lat] },
                    "properties": {
                        "node": node.to_string(),
                        "rank": i + 1,
                        "score": score,
                        "population": mode.population,
                    }
                }))
            })
            .collect()
    };
    json!({ "type": "FeatureCollection", "features": features })
}
