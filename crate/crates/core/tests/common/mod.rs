#![allow(dead_code)]

use ensy::data::{BoundPolicy, Bounds, Dataset, Feature, FeatureKind, Row, Schema, Value};

pub fn num(name: &str) -> Feature {
    Feature {
        name: name.into(),
        kind: FeatureKind::Numeric {
            bounds: None,
            policy: BoundPolicy::None,
        },
    }
}

pub fn bounded(name: &str, lower: f64, upper: f64, policy: BoundPolicy) -> Feature {
    Feature {
        name: name.into(),
        kind: FeatureKind::Numeric {
            bounds: Some(Bounds::new(lower, upper).unwrap()),
            policy,
        },
    }
}

pub fn cat(name: &str) -> Feature {
    Feature {
        name: name.into(),
        kind: FeatureKind::Categorical { categories: None },
    }
}

pub fn schema(features: Vec<Feature>, classes: &[&str]) -> Schema {
    Schema::new(
        features,
        "label",
        classes.iter().map(|c| c.to_string()).collect(),
    )
    .unwrap()
}

pub fn row(values: Vec<Value>, label: &str) -> Row {
    Row {
        values,
        label: label.into(),
    }
}

/// Two numeric features and one categorical; class `a` sits near the origin,
/// class `b` near (4, 4) with a different category mix.
pub fn mixed_dataset(n_a: usize, n_b: usize, seed: u64) -> Dataset {
    use rand::Rng;
    let mut rng = ensy::seed::rng(seed, &[]);
    let mut rows = Vec::new();
    for (label, n, centre, cats) in [("a", n_a, 0.0, ["u", "v"]), ("b", n_b, 4.0, ["v", "w"])] {
        for _ in 0..n {
            let x: f64 = centre + rng.random_range(-1.0..1.0);
            let y: f64 = centre + rng.random_range(-1.0..1.0);
            let c = cats[rng.random_range(0..2)];
            rows.push(row(
                vec![Value::Num(x), Value::Num(y), Value::Cat(c.into())],
                label,
            ));
        }
    }
    Dataset::new(
        schema(vec![num("x"), num("y"), cat("c")], &["a", "b"]),
        rows,
    )
    .unwrap()
}

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_ensy")
}
