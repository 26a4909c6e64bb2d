//! The fixed feature-column layout and its version hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// 5 carrier + 10×8 offense + 11×9 defense + 9 Voronoi columns.
pub const COLUMN_COUNT: usize = 5 + 10 * 8 + 11 * 9 + 9;

/// Signed is the standard feature space; Absolute replaces the signed
/// y/direction columns with absolute values (used by the linear model,
/// which cannot exploit field-side symmetry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaVariant {
    Signed,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub variant: SchemaVariant,
    pub columns: Vec<String>,
    pub hash: String,
}

/// Column-name suffixes whose values are folded to absolute in the
/// `Absolute` variant.
const ABS_SUFFIXES: [&str; 3] = ["_y_adj", "_y_change", "_dir_target_endzone"];

impl FeatureSchema {
    pub fn new(variant: SchemaVariant) -> FeatureSchema {
        let mut columns = Vec::with_capacity(COLUMN_COUNT);
        for f in ["x_adj", "y_adj", "dir_target_endzone", "s", "dis"] {
            columns.push(format!("bc_{f}"));
        }
        for k in 1..=10 {
            for f in [
                "x_adj",
                "y_adj",
                "dir_target_endzone",
                "s",
                "dis",
                "x_change",
                "y_change",
                "dist_to_ball",
            ] {
                columns.push(format!("offense{k}_{f}"));
            }
        }
        for k in 1..=11 {
            for f in [
                "x_adj",
                "y_adj",
                "dir_target_endzone",
                "s",
                "dis",
                "x_change",
                "y_change",
                "dist_to_ball",
                "dir_wrt_bc_diff",
            ] {
                columns.push(format!("defense{k}_{f}"));
            }
        }
        for f in [
            "voronoi_bc_close_adj",
            "voronoi_bc_far_adj",
            "voronoi_bc_area",
            "voronoi_bc_area_in_front",
            "voronoi_bc_bubble",
            "voronoi_bc_only_close_adj",
            "voronoi_bc_only_far_adj",
            "voronoi_bc_only_area",
            "voronoi_bc_only_area_in_front",
        ] {
            columns.push(f.to_string());
        }
        debug_assert_eq!(columns.len(), COLUMN_COUNT);

        let mut hasher = Sha256::new();
        hasher.update(b"openfield-features-v1\n");
        hasher.update(match variant {
            SchemaVariant::Signed => b"signed\n".as_slice(),
            SchemaVariant::Absolute => b"absolute\n".as_slice(),
        });
        for c in &columns {
            hasher.update(c.as_bytes());
            hasher.update(b"\n");
        }
        let hash = hex::encode(hasher.finalize());

        FeatureSchema {
            variant,
            columns,
            hash,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// True for columns the Absolute variant folds.
    pub fn is_absolute_column(name: &str) -> bool {
        ABS_SUFFIXES.iter().any(|s| name.ends_with(s))
    }

    /// Apply the variant's value transform to a signed row.
    pub fn transform(&self, mut values: Vec<f64>) -> Vec<f64> {
        if self.variant == SchemaVariant::Absolute {
            for (v, name) in values.iter_mut().zip(&self.columns) {
                if Self::is_absolute_column(name) {
                    *v = v.abs();
                }
            }
        }
        values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_count_and_hash_are_stable() {
        let s = FeatureSchema::new(SchemaVariant::Signed);
        assert_eq!(s.columns.len(), 193);
        assert_eq!(s.columns[0], "bc_x_adj");
        assert_eq!(s.columns[5], "offense1_x_adj");
        assert_eq!(s.column_index("defense1_x_adj"), Some(85));
        assert_eq!(s.columns.last().unwrap(), "voronoi_bc_only_area_in_front");
        // Hash is a pure function of the layout.
        let s2 = FeatureSchema::new(SchemaVariant::Signed);
        assert_eq!(s.hash, s2.hash);
    }

    #[test]
    fn absolute_columns_are_the_y_and_dir_ones() {
        assert!(FeatureSchema::is_absolute_column("bc_y_adj"));
        assert!(FeatureSchema::is_absolute_column("defense3_y_change"));
        assert!(FeatureSchema::is_absolute_column("offense2_dir_target_endzone"));
        assert!(!FeatureSchema::is_absolute_column("defense1_dir_wrt_bc_diff"));
        assert!(!FeatureSchema::is_absolute_column("bc_s"));
        assert!(!FeatureSchema::is_absolute_column("voronoi_bc_area"));
    }
}
