use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::sha256_hex;

pub type ClassId = u8;

/// Void id used by the built-in catalogs.
pub const DESK_VOID: ClassId = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub id: ClassId,
    pub name: String,
    pub is_thing: bool,
    pub is_eval: bool,
}

/// Ordered class definitions plus the reserved void id.
///
/// Ids are dense from zero and the catalog order is the order used by every
/// per-class table. Classes with `is_eval == false` are treated as void by
/// the metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct ClassCatalog {
    classes: Vec<ClassDef>,
    void_id: ClassId,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    void_id: ClassId,
    classes: Vec<ClassDef>,
}

impl TryFrom<RawCatalog> for ClassCatalog {
    type Error = Error;

    fn try_from(raw: RawCatalog) -> Result<Self> {
        ClassCatalog::new(raw.classes, raw.void_id)
    }
}

impl From<ClassCatalog> for RawCatalog {
    fn from(c: ClassCatalog) -> Self {
        RawCatalog {
            void_id: c.void_id,
            classes: c.classes,
        }
    }
}

impl ClassCatalog {
    pub fn new(classes: Vec<ClassDef>, void_id: ClassId) -> Result<Self> {
        for (i, c) in classes.iter().enumerate() {
            if c.id as usize != i {
                return Err(Error::Validation(format!(
                    "class ids must be dense from 0: position {i} has id {}",
                    c.id
                )));
            }
        }
        if (void_id as usize) < classes.len() {
            return Err(Error::Validation(format!(
                "void id {void_id} collides with a class id"
            )));
        }
        let eval = classes.iter().filter(|c| c.is_eval);
        let (things, stuff) = eval.fold((0, 0), |(t, s), c| {
            if c.is_thing {
                (t + 1, s)
            } else {
                (t, s + 1)
            }
        });
        if things == 0 || stuff == 0 {
            return Err(Error::Validation(
                "catalog needs at least one thing and one stuff eval class".into(),
            ));
        }
        Ok(ClassCatalog { classes, void_id })
    }

    /// The 9-class catalog used by the scene generator, in Cityscapes order.
    pub fn desk() -> Self {
        let spec: [(&str, bool); 9] = [
            ("road", false),
            ("sidewalk", false),
            ("building", false),
            ("pole", true),
            ("traffic light", true),
            ("vegetation", false),
            ("sky", false),
            ("person", true),
            ("car", true),
        ];
        Self::from_table(&spec)
    }

    /// The 19 Cityscapes evaluation classes.
    pub fn cityscapes() -> Self {
        let spec: [(&str, bool); 19] = [
            ("road", false),
            ("sidewalk", false),
            ("building", false),
            ("wall", false),
            ("fence", false),
            ("pole", false),
            ("traffic light", false),
            ("traffic sign", false),
            ("vegetation", false),
            ("terrain", false),
            ("sky", false),
            ("person", true),
            ("rider", true),
            ("car", true),
            ("truck", true),
            ("bus", true),
            ("train", true),
            ("motorcycle", true),
            ("bicycle", true),
        ];
        Self::from_table(&spec)
    }

    fn from_table(spec: &[(&str, bool)]) -> Self {
        let classes = spec
            .iter()
            .enumerate()
            .map(|(i, (name, is_thing))| ClassDef {
                id: i as ClassId,
                name: (*name).to_string(),
                is_thing: *is_thing,
                is_eval: true,
            })
            .collect();
        ClassCatalog::new(classes, DESK_VOID).expect("built-in catalog is valid")
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn void_id(&self) -> ClassId {
        self.void_id
    }

    pub fn get(&self, id: ClassId) -> Option<&ClassDef> {
        self.classes.get(id as usize)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id as usize) < self.classes.len()
    }

    pub fn is_thing(&self, id: ClassId) -> bool {
        self.get(id).is_some_and(|c| c.is_thing)
    }

    pub fn is_stuff(&self, id: ClassId) -> bool {
        self.get(id).is_some_and(|c| !c.is_thing)
    }

    /// True for classes that take part in evaluation.
    pub fn is_eval(&self, id: ClassId) -> bool {
        self.get(id).is_some_and(|c| c.is_eval)
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn name(&self, id: ClassId) -> &str {
        self.get(id).map(|c| c.name.as_str()).unwrap_or("void")
    }

    pub fn eval_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().filter(|c| c.is_eval).map(|c| c.id)
    }

    pub fn thing_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().filter(|c| c.is_thing).map(|c| c.id)
    }

    pub fn stuff_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().filter(|c| !c.is_thing).map(|c| c.id)
    }

    /// Stable content hash, used to tag checkpoints and evaluation shards.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("catalog serializes");
        sha256_hex(&json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Resolves `"desk"` and `"cityscapes"` to the built-ins, anything else
    /// is read as a catalog JSON file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "desk" => Ok(Self::desk()),
            "cityscapes" => Ok(Self::cityscapes()),
            path => Self::load(std::path::Path::new(path)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        let desk = ClassCatalog::desk();
        assert_eq!(desk.len(), 9);
        assert_eq!(desk.thing_ids().count(), 4);
        assert_eq!(desk.stuff_ids().count(), 5);
        assert_eq!(ClassCatalog::cityscapes().len(), 19);
        assert_eq!(ClassCatalog::cityscapes().thing_ids().count(), 8);
    }

    #[test]
    fn rejects_sparse_ids_and_void_collision() {
        let mut classes = ClassCatalog::desk().classes().to_vec();
        classes[3].id = 7;
        assert!(ClassCatalog::new(classes, 255).is_err());
        let classes = ClassCatalog::desk().classes().to_vec();
        assert!(ClassCatalog::new(classes, 4).is_err());
    }

    #[test]
    fn rejects_catalog_without_things() {
        let classes = ClassCatalog::desk()
            .classes()
            .iter()
            .cloned()
            .map(|mut c| {
                c.is_thing = false;
                c
            })
            .collect();
        assert!(ClassCatalog::new(classes, 255).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let desk = ClassCatalog::desk();
        let back = ClassCatalog::from_json(&desk.to_json()).unwrap();
        assert_eq!(back, desk);
        assert!(ClassCatalog::from_json(r#"{"void_id":0,"classes":[]}"#).is_err());
    }
}
