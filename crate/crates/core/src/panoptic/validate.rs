use std::fmt;

use super::catalog::{ClassCatalog, ClassId};
use super::label::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    UnknownClass(ClassId),
    InstanceOnStuff,
    InstanceOnVoid,
    /// A thing pixel that carries no instance id.
    EmptyInstance,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::UnknownClass(c) => write!(f, "unknown class {c}"),
            ViolationKind::InstanceOnStuff => f.write_str("instance on stuff"),
            ViolationKind::InstanceOnVoid => f.write_str("instance on void"),
            ViolationKind::EmptyInstance => f.write_str("empty instance"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub x: usize,
    pub y: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at pixel ({}, {})", self.kind, self.x, self.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Checks a label map against its catalog. Violations are returned as data,
/// one per offending pixel, in row-major order.
pub fn validate(map: &LabelMap, catalog: &ClassCatalog) -> ValidationReport {
    let void = catalog.void_id();
    let mut violations = Vec::new();
    for i in 0..map.len() {
        let (s, inst) = map.key(i);
        let kind = if s == void {
            (inst != 0).then_some(ViolationKind::InstanceOnVoid)
        } else if !catalog.contains(s) {
            Some(ViolationKind::UnknownClass(s))
        } else if catalog.is_thing(s) {
            (inst == 0).then_some(ViolationKind::EmptyInstance)
        } else {
            (inst != 0).then_some(ViolationKind::InstanceOnStuff)
        };
        if let Some(kind) = kind {
            violations.push(Violation {
                x: i % map.width(),
                y: i / map.width(),
                kind,
            });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> ClassCatalog {
        ClassCatalog::desk()
    }

    #[test]
    fn valid_map_passes() {
        let cat = desk();
        let car = cat.id_of("car").unwrap();
        let map = LabelMap::from_parts(3, 1, vec![0, car, 255], vec![0, 1, 0]).unwrap();
        assert!(validate(&map, &cat).is_pass());
    }

    #[test]
    fn instance_on_sky_is_reported() {
        let cat = desk();
        let sky = cat.id_of("sky").unwrap();
        let map = LabelMap::from_parts(2, 1, vec![0, sky], vec![0, 3]).unwrap();
        let report = validate(&map, &cat);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].to_string(), "instance on stuff at pixel (1, 0)");
    }

    #[test]
    fn unknown_class_is_reported() {
        let cat = ClassCatalog::cityscapes();
        let map = LabelMap::from_parts(1, 1, vec![99], vec![0]).unwrap();
        let report = validate(&map, &cat);
        assert_eq!(report.violations[0].kind, ViolationKind::UnknownClass(99));
        assert!(report.violations[0].to_string().starts_with("unknown class"));
    }

    #[test]
    fn thing_without_instance_and_instance_on_void() {
        let cat = desk();
        let car = cat.id_of("car").unwrap();
        let map = LabelMap::from_parts(2, 1, vec![car, 255], vec![0, 2]).unwrap();
        let kinds: Vec<_> = validate(&map, &cat).violations.iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::EmptyInstance, ViolationKind::InstanceOnVoid]);
    }
}
