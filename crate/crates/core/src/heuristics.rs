//! Publication strategies: the full-materialization baseline and the four
//! publication heuristics, as pure functions from a catalog and an inventory
//! snapshot to a set of publication items.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{CanonicalIdError, Inventory, Money, ProductCatalog, RangeSummary, Variation, VariationIter};
use crate::error::{Error, Result};

pub const DEFAULT_HARD_CAP: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    Full,
    Abstraction,
    Specialization,
    TypeLevel,
    Selective,
}

impl Heuristic {
    pub const ALL: [Heuristic; 5] = [
        Heuristic::Full,
        Heuristic::Abstraction,
        Heuristic::Specialization,
        Heuristic::TypeLevel,
        Heuristic::Selective,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::Full => "full",
            Heuristic::Abstraction => "abstraction",
            Heuristic::Specialization => "specialization",
            Heuristic::TypeLevel => "type-level",
            Heuristic::Selective => "selective",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown heuristic {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Concrete,
    Abstract,
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceInfo {
    Exact(Money),
    Range { min: Money, max: Money },
}

/// One published offer: a fixed partial assignment plus summaries of
/// everything left open.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicationItem {
    kind: ItemKind,
    fixed: Vec<Option<u32>>,
    price: PriceInfo,
    available: bool,
    requires_elevation: bool,
}

impl PublicationItem {
    fn build(
        catalog: &ProductCatalog,
        inventory: &Inventory,
        fixed: Vec<Option<u32>>,
        requires_elevation: bool,
    ) -> Self {
        let n_fixed = fixed.iter().filter(|f| f.is_some()).count();
        let kind = if n_fixed == fixed.len() {
            ItemKind::Concrete
        } else if n_fixed == 0 {
            ItemKind::Abstract
        } else {
            ItemKind::Partial
        };
        let (price, available) = if kind == ItemKind::Concrete {
            let v = Variation::from_indices(fixed.iter().map(|f| f.expect("concrete")).collect());
            (
                PriceInfo::Exact(catalog.price_unchecked(&v)),
                inventory.is_available(catalog, &v),
            )
        } else {
            let (min, max) = catalog.price_bounds(&fixed);
            let available = catalog
                .enumerate_consistent(&fixed)
                .any(|v| inventory.is_available(catalog, &v));
            (PriceInfo::Range { min, max }, available)
        };
        PublicationItem {
            kind,
            fixed,
            price,
            available,
            requires_elevation,
        }
    }

    pub fn kind(&self) -> ItemKind {
        self.kind
    }

    /// Per-dimension value index, `None` where the dimension is left open.
    pub fn fixed_indices(&self) -> &[Option<u32>] {
        &self.fixed
    }

    pub fn fixed<'a>(&self, catalog: &'a ProductCatalog) -> Vec<(&'a str, &'a str)> {
        catalog
            .dimensions()
            .iter()
            .zip(&self.fixed)
            .filter_map(|(d, f)| f.map(|i| (d.name(), d.values()[i as usize].as_str())))
            .collect()
    }

    pub fn ranges<'a>(&self, catalog: &'a ProductCatalog) -> Vec<(&'a str, &'a RangeSummary)> {
        catalog
            .dimensions()
            .iter()
            .zip(&self.fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(d, _)| (d.name(), d.summary()))
            .collect()
    }

    pub fn price(&self) -> PriceInfo {
        self.price
    }

    /// Exact availability for concrete items; for the others, whether at
    /// least one consistent variation is available.
    pub fn available(&self) -> bool {
        self.available
    }

    pub fn requires_elevation(&self) -> bool {
        self.requires_elevation
    }

    pub fn variation(&self) -> Option<Variation> {
        self.fixed
            .iter()
            .copied()
            .collect::<Option<Vec<u32>>>()
            .map(Variation::from_indices)
    }

    pub fn is_consistent_with(&self, v: &Variation) -> bool {
        self.fixed
            .iter()
            .zip(v.indices())
            .all(|(f, i)| f.is_none_or(|f| f == *i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassificationPolicy {
    /// A dimension is short iff its length is at most the threshold.
    Threshold { length_threshold: usize },
    /// Greedily mark dimensions short, shortest first, while the projected
    /// annotation count times `item_bytes` stays within `byte_budget`.
    Budget { byte_budget: u64, item_bytes: u64 },
    /// Exactly the named dimensions are short, whatever their length.
    Fixed { short: Vec<String> },
}

impl Default for ClassificationPolicy {
    fn default() -> Self {
        ClassificationPolicy::Threshold { length_threshold: 5 }
    }
}

impl ClassificationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassificationPolicy::Threshold { length_threshold } if length_threshold < 1 => {
                Err(Error::InvalidPolicy("length threshold must be at least 1".into()))
            }
            ClassificationPolicy::Budget { item_bytes: 0, .. } => Err(Error::InvalidPolicy(
                "per-annotation byte estimate must be positive".into(),
            )),
            ClassificationPolicy::Budget {
                byte_budget,
                item_bytes,
            } if byte_budget < item_bytes => Err(Error::InvalidPolicy(format!(
                "byte budget {byte_budget} is smaller than one annotation ({item_bytes} bytes)"
            ))),
            ClassificationPolicy::Fixed { ref short }
                if short.iter().collect::<std::collections::HashSet<_>>().len() != short.len() =>
            {
                Err(Error::InvalidPolicy(
                    "fixed classification names a dimension twice".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionClassification {
    pub short: Vec<String>,
    pub long: Vec<String>,
    pub policy: ClassificationPolicy,
}

impl DimensionClassification {
    fn short_mask(&self, catalog: &ProductCatalog) -> Result<Vec<bool>> {
        let mut mask: Vec<Option<bool>> = vec![None; catalog.dimensions().len()];
        let tagged = self
            .short
            .iter()
            .map(|n| (n, true))
            .chain(self.long.iter().map(|n| (n, false)));
        for (name, is_short) in tagged {
            let (i, _) = catalog
                .dimension(name)
                .ok_or_else(|| Error::Validation(format!("classification names unknown dimension {name:?}")))?;
            if mask[i].replace(is_short).is_some() {
                return Err(Error::Validation(format!(
                    "classification lists dimension {name} twice"
                )));
            }
        }
        mask.into_iter()
            .zip(catalog.dimensions())
            .map(|(m, d)| m.ok_or_else(|| Error::Validation(format!("classification misses dimension {}", d.name()))))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PickerPolicy {
    #[default]
    FirstLexicographic,
    /// Uniform over available variations, reproducible from the seed.
    SeededRandom { seed: u64 },
    /// Publish one named variation.
    Fixed { canonical_id: String },
}

/// Everything besides the catalog and inventory that shapes a publication.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PublishOptions {
    pub classification: ClassificationPolicy,
    pub picker: PickerPolicy,
    pub hard_cap: u64,
}

impl Default for PublishOptions {
    fn default() -> Self {
        PublishOptions {
            classification: ClassificationPolicy::default(),
            picker: PickerPolicy::default(),
            hard_cap: DEFAULT_HARD_CAP,
        }
    }
}

/// Streaming full materialization; one concrete item per variation.
pub struct FullMaterialization<'a> {
    catalog: &'a ProductCatalog,
    inventory: &'a Inventory,
    variations: VariationIter,
}

impl Iterator for FullMaterialization<'_> {
    type Item = PublicationItem;

    fn next(&mut self) -> Option<PublicationItem> {
        let v = self.variations.next()?;
        let fixed = v.indices().iter().copied().map(Some).collect();
        Some(PublicationItem::build(self.catalog, self.inventory, fixed, false))
    }
}

fn check_cap(catalog: &ProductCatalog, hard_cap: u64) -> Result<()> {
    let count = catalog.count_variations();
    if count > hard_cap {
        return Err(Error::CapExceeded { count, cap: hard_cap });
    }
    Ok(())
}

pub fn full_materialization<'a>(
    catalog: &'a ProductCatalog,
    inventory: &'a Inventory,
    hard_cap: u64,
) -> Result<FullMaterialization<'a>> {
    full_materialization_range(catalog, inventory, hard_cap, 0, None)
}

/// A window of the full materialization, without producing the items before it.
pub fn full_materialization_range<'a>(
    catalog: &'a ProductCatalog,
    inventory: &'a Inventory,
    hard_cap: u64,
    start: u64,
    limit: Option<u64>,
) -> Result<FullMaterialization<'a>> {
    check_cap(catalog, hard_cap)?;
    Ok(FullMaterialization {
        catalog,
        inventory,
        variations: catalog.enumerate_range(start, limit),
    })
}

pub fn abstraction(catalog: &ProductCatalog, inventory: &Inventory) -> Vec<PublicationItem> {
    let fixed = vec![None; catalog.dimensions().len()];
    vec![PublicationItem::build(catalog, inventory, fixed, true)]
}

pub fn specialization(
    catalog: &ProductCatalog,
    inventory: &Inventory,
    picker: &PickerPolicy,
) -> Result<Vec<PublicationItem>> {
    let available = |v: &Variation| inventory.is_available(catalog, v);
    let chosen = match picker {
        PickerPolicy::FirstLexicographic => catalog
            .enumerate_variations(None)
            .find(available)
            .ok_or(Error::EmptyInventory)?,
        PickerPolicy::SeededRandom { seed } => {
            // Reservoir sampling of size one.
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut chosen = None;
            for (i, v) in catalog.enumerate_variations(None).filter(available).enumerate() {
                if rng.random_range(0..i as u64 + 1) == 0 {
                    chosen = Some(v);
                }
            }
            chosen.ok_or(Error::EmptyInventory)?
        }
        PickerPolicy::Fixed { canonical_id } => {
            let v = catalog.parse_canonical_id(canonical_id).map_err(|e| match e {
                CanonicalIdError::Malformed(m) => Error::PickerRejected(format!("malformed canonical id: {m}")),
                CanonicalIdError::NotInSpace(id) => Error::PickerRejected(format!("unknown variation {id}")),
            })?;
            if !available(&v) {
                if catalog.enumerate_variations(None).any(|v| available(&v)) {
                    return Err(Error::PickerRejected(format!(
                        "variation {canonical_id} is not available"
                    )));
                }
                return Err(Error::EmptyInventory);
            }
            v
        }
    };
    let fixed = chosen.indices().iter().copied().map(Some).collect();
    Ok(vec![PublicationItem::build(catalog, inventory, fixed, true)])
}

pub fn type_level_materialization(catalog: &ProductCatalog, inventory: &Inventory) -> Vec<PublicationItem> {
    let arity = catalog.dimensions().len();
    let mut items = Vec::new();
    for (di, d) in catalog.dimensions().iter().enumerate() {
        for vi in 0..d.len() as u32 {
            let mut fixed = vec![None; arity];
            fixed[di] = Some(vi);
            items.push(PublicationItem::build(catalog, inventory, fixed, true));
        }
    }
    items
}

pub fn classify_dimensions(catalog: &ProductCatalog, policy: &ClassificationPolicy) -> Result<DimensionClassification> {
    policy.validate()?;
    let dims = catalog.dimensions();
    let mut is_short = vec![false; dims.len()];
    match policy {
        &ClassificationPolicy::Threshold { length_threshold } => {
            for (flag, d) in is_short.iter_mut().zip(dims) {
                *flag = d.len() <= length_threshold;
            }
        }
        &ClassificationPolicy::Budget {
            byte_budget,
            item_bytes,
        } => {
            let mut order: Vec<usize> = (0..dims.len()).collect();
            order.sort_by_key(|&i| (dims[i].len(), i));
            let mut projected: u128 = 1;
            for i in order {
                let next = projected * dims[i].len() as u128;
                if next * item_bytes as u128 > byte_budget as u128 {
                    break;
                }
                projected = next;
                is_short[i] = true;
            }
        }
        ClassificationPolicy::Fixed { short } => {
            for name in short {
                let (i, _) = catalog
                    .dimension(name)
                    .ok_or_else(|| Error::Validation(format!("classification names unknown dimension {name:?}")))?;
                is_short[i] = true;
            }
        }
    }
    let names = |want: bool| {
        dims.iter()
            .zip(&is_short)
            .filter(|(_, &s)| s == want)
            .map(|(d, _)| d.name().to_string())
            .collect()
    };
    Ok(DimensionClassification {
        short: names(true),
        long: names(false),
        policy: policy.clone(),
    })
}

/// Joint materialization of the short dimensions; long dimensions stay open.
pub fn selective_instance_materialization(
    catalog: &ProductCatalog,
    inventory: &Inventory,
    classification: &DimensionClassification,
) -> Result<Vec<PublicationItem>> {
    let short = classification.short_mask(catalog)?;
    // Pin long dimensions so the odometer only walks the short ones.
    let pinned: Vec<Option<u32>> = short.iter().map(|&s| if s { None } else { Some(0) }).collect();
    Ok(catalog
        .enumerate_consistent(&pinned)
        .map(|v| {
            let fixed = v.indices().iter().zip(&short).map(|(&i, &s)| s.then_some(i)).collect();
            PublicationItem::build(catalog, inventory, fixed, true)
        })
        .collect())
}

pub type ItemStream<'a> = Box<dyn Iterator<Item = PublicationItem> + Send + 'a>;

/// Dispatches to the named strategy. Full materialization streams; the
/// heuristics produce small vectors.
pub fn publish<'a>(
    heuristic: Heuristic,
    catalog: &'a ProductCatalog,
    inventory: &'a Inventory,
    options: &PublishOptions,
) -> Result<ItemStream<'a>> {
    Ok(match heuristic {
        Heuristic::Full => Box::new(full_materialization(catalog, inventory, options.hard_cap)?),
        Heuristic::Abstraction => Box::new(abstraction(catalog, inventory).into_iter()),
        Heuristic::Specialization => Box::new(specialization(catalog, inventory, &options.picker)?.into_iter()),
        Heuristic::TypeLevel => Box::new(type_level_materialization(catalog, inventory).into_iter()),
        Heuristic::Selective => {
            let classification = classify_dimensions(catalog, &options.classification)?;
            Box::new(selective_instance_materialization(catalog, inventory, &classification)?.into_iter())
        }
    })
}

/// Closed-form item count of a strategy; no items are generated.
pub fn expected_count(heuristic: Heuristic, catalog: &ProductCatalog, options: &PublishOptions) -> Result<u64> {
    let lengths = catalog.dimensions().iter().map(|d| d.len() as u64);
    Ok(match heuristic {
        Heuristic::Full => catalog.count_variations(),
        Heuristic::Abstraction | Heuristic::Specialization => 1,
        Heuristic::TypeLevel => lengths.sum(),
        Heuristic::Selective => {
            let classification = classify_dimensions(catalog, &options.classification)?;
            let short = classification.short_mask(catalog)?;
            lengths.zip(short).filter(|(_, s)| *s).map(|(l, _)| l).product()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::fixtures::*;
    use std::collections::HashSet;

    fn inv(c: &ProductCatalog) -> Inventory {
        Inventory::new(c)
    }

    #[test]
    fn heuristic_identifiers_round_trip() {
        for h in Heuristic::ALL {
            assert_eq!(h.as_str().parse::<Heuristic>().unwrap(), h);
            assert_eq!(serde_json::to_string(&h).unwrap(), format!("\"{h}\""));
        }
        assert!("bogus".parse::<Heuristic>().is_err());
    }

    #[test]
    fn full_materialization_counts() {
        let c = eval_hotel(365, 1.0);
        let i = inv(&c);
        let items = full_materialization(&c, &i, DEFAULT_HARD_CAP).unwrap();
        let mut n = 0;
        for item in items {
            assert_eq!(item.kind(), ItemKind::Concrete);
            assert!(!item.requires_elevation());
            assert!(matches!(item.price(), PriceInfo::Exact(_)));
            n += 1;
        }
        assert_eq!(n, 87_600);
        let t = tshirt();
        assert_eq!(
            full_materialization(&t, &inv(&t), DEFAULT_HARD_CAP).unwrap().count(),
            27
        );
        let one = catalog(vec![categorical("only", &["x"])], flat_pricing(), 1.0);
        assert_eq!(full_materialization(&one, &inv(&one), 10).unwrap().count(), 1);
    }

    #[test]
    fn full_materialization_refuses_above_the_cap() {
        let c = eval_hotel(365, 1.0);
        let i = inv(&c);
        let err = full_materialization(&c, &i, 1000).err().unwrap();
        let text = err.to_string();
        assert!(text.contains("87600") && text.contains("1000"), "{text}");
    }

    #[test]
    fn full_materialization_windows() {
        let c = tshirt();
        let i = inv(&c);
        let all: Vec<_> = full_materialization(&c, &i, 100).unwrap().collect();
        let window: Vec<_> = full_materialization_range(&c, &i, 100, 10, Some(5)).unwrap().collect();
        assert_eq!(window, all[10..15]);
        assert_eq!(full_materialization_range(&c, &i, 100, 27, None).unwrap().count(), 0);
    }

    #[test]
    fn abstraction_is_one_abstract_item() {
        let c = eval_hotel(3, 1.0);
        let items = abstraction(&c, &inv(&c));
        assert_eq!(items.len(), 1);
        let item = &items[0];
        assert_eq!(item.kind(), ItemKind::Abstract);
        assert!(item.fixed(&c).is_empty());
        assert_eq!(item.ranges(&c).len(), 5);
        assert!(item.requires_elevation());
        let prices: Vec<Money> = c.enumerate_variations(None).map(|v| c.price(&v).unwrap()).collect();
        assert_eq!(
            item.price(),
            PriceInfo::Range {
                min: *prices.iter().min().unwrap(),
                max: *prices.iter().max().unwrap()
            }
        );
    }

    #[test]
    fn abstraction_with_constant_price_is_degenerate() {
        let c = tshirt();
        let p = Money::from_minor(10000);
        assert_eq!(
            abstraction(&c, &inv(&c))[0].price(),
            PriceInfo::Range { min: p, max: p }
        );
    }

    #[test]
    fn abstraction_reports_occupancy_span() {
        // Room types, occupancy 1-3, catering, stay of one or two weeks, all-year booking.
        let c = catalog(
            vec![
                categorical("room", &["room", "suite"]),
                ordinal("occupancy", 1, 3),
                categorical("catering", &["breakfast", "half-board"]),
                categorical("stay", &["1w", "2w"]),
                temporal("booking", "2019-01-01", 365),
            ],
            flat_pricing(),
            1.0,
        );
        let item = &abstraction(&c, &inv(&c))[0];
        let ranges = item.ranges(&c);
        let occupancy = ranges.iter().find(|(n, _)| *n == "occupancy").unwrap().1;
        assert_eq!(
            occupancy,
            &RangeSummary::Span {
                min: "1".into(),
                max: "3".into(),
                count: 3
            }
        );
    }

    #[test]
    fn single_valued_dimensions_stay_in_ranges() {
        let c = catalog(
            vec![categorical("kind", &["room"]), categorical("catering", &["a", "b"])],
            flat_pricing(),
            1.0,
        );
        let item = &abstraction(&c, &inv(&c))[0];
        let ranges = item.ranges(&c);
        assert_eq!(ranges.len(), 2);
        assert!(!ranges[0].1.is_abstracted());
        assert!(ranges[1].1.is_abstracted());
    }

    #[test]
    fn specialization_first_lexicographic() {
        let c = eval_hotel(365, 1.0);
        let items = specialization(&c, &inv(&c), &PickerPolicy::FirstLexicographic).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].kind(), ItemKind::Concrete);
        assert!(items[0].requires_elevation());
        assert_eq!(items[0].variation(), c.variation_at(0));
    }

    #[test]
    fn specialization_picks_the_only_available_variation() {
        let c = eval_hotel(3, 1.0);
        let mut i = inv(&c);
        let keep = c.variation_at(77).unwrap();
        for v in c.enumerate_variations(None).filter(|v| *v != keep) {
            i.book(&c, &v);
        }
        for picker in [PickerPolicy::FirstLexicographic, PickerPolicy::SeededRandom { seed: 3 }] {
            let items = specialization(&c, &i, &picker).unwrap();
            assert_eq!(items[0].variation().as_ref(), Some(&keep));
        }
    }

    #[test]
    fn specialization_random_picker_is_reproducible_and_available() {
        let c = eval_hotel(30, 0.5);
        let i = inv(&c);
        let picker = PickerPolicy::SeededRandom { seed: 11 };
        let a = specialization(&c, &i, &picker).unwrap();
        assert_eq!(a, specialization(&c, &i, &picker).unwrap());
        assert!(i.is_available(&c, &a[0].variation().unwrap()));
    }

    #[test]
    fn specialization_errors_distinguish_cause() {
        let c = eval_hotel(3, 0.0);
        let i = inv(&c);
        assert!(matches!(
            specialization(&c, &i, &PickerPolicy::FirstLexicographic),
            Err(Error::EmptyInventory)
        ));
        let id = c.canonical_id(&c.variation_at(0).unwrap());
        assert!(matches!(
            specialization(
                &c,
                &i,
                &PickerPolicy::Fixed {
                    canonical_id: id.clone()
                }
            ),
            Err(Error::EmptyInventory)
        ));

        let c = eval_hotel(3, 1.0);
        let mut i = inv(&c);
        assert!(matches!(
            specialization(
                &c,
                &i,
                &PickerPolicy::Fixed {
                    canonical_id: "type=x".into()
                }
            ),
            Err(Error::PickerRejected(_))
        ));
        i.book(&c, &c.variation_at(0).unwrap());
        assert!(matches!(
            specialization(&c, &i, &PickerPolicy::Fixed { canonical_id: id }),
            Err(Error::PickerRejected(_))
        ));
    }

    #[test]
    fn type_level_counts() {
        let t = tshirt();
        assert_eq!(type_level_materialization(&t, &inv(&t)).len(), 9);
        let c = eval_hotel(365, 1.0);
        let items = type_level_materialization(&c, &inv(&c));
        assert_eq!(items.len(), 2 + 2 + 2 + 365 + 30);
        assert!(items
            .iter()
            .all(|i| i.kind() == ItemKind::Partial && i.requires_elevation()));
    }

    #[test]
    fn type_level_single_dimension() {
        let c = catalog(vec![categorical("dim", &["a", "b"])], flat_pricing(), 1.0);
        let items = type_level_materialization(&c, &inv(&c));
        let fixed: Vec<_> = items.iter().map(|i| i.fixed(&c)).collect();
        assert_eq!(fixed, vec![vec![("dim", "a")], vec![("dim", "b")]]);
    }

    #[test]
    fn threshold_classification() {
        let c = eval_hotel(365, 1.0);
        let k = classify_dimensions(&c, &ClassificationPolicy::Threshold { length_threshold: 5 }).unwrap();
        assert_eq!(k.short, ["type", "catering", "occupancy"]);
        assert_eq!(k.long, ["arrival", "stay"]);
        let all = classify_dimensions(&c, &ClassificationPolicy::Threshold { length_threshold: 365 }).unwrap();
        assert_eq!(all.short.len(), 5);
        assert!(all.long.is_empty());
    }

    #[test]
    fn budget_classification() {
        let c = eval_hotel(365, 1.0);
        let k = classify_dimensions(
            &c,
            &ClassificationPolicy::Budget {
                byte_budget: 5000,
                item_bytes: 600,
            },
        )
        .unwrap();
        assert_eq!(k.short, ["type", "catering", "occupancy"]);
        // 240 items * 600 B fits a 144 kB budget, the arrival dimension does not.
        let k = classify_dimensions(
            &c,
            &ClassificationPolicy::Budget {
                byte_budget: 144_000,
                item_bytes: 600,
            },
        )
        .unwrap();
        assert_eq!(k.long, ["arrival"]);
    }

    #[test]
    fn fixed_classification_ignores_length() {
        let c = eval_hotel(1, 1.0);
        let policy = ClassificationPolicy::Fixed {
            short: vec!["occupancy".into(), "type".into()],
        };
        let k = classify_dimensions(&c, &policy).unwrap();
        assert_eq!(k.short, ["type", "occupancy"]);
        assert_eq!(k.long, ["catering", "arrival", "stay"]);
        let unknown = ClassificationPolicy::Fixed {
            short: vec!["colour".into()],
        };
        assert!(matches!(classify_dimensions(&c, &unknown), Err(Error::Validation(_))));
        let twice = ClassificationPolicy::Fixed {
            short: vec!["type".into(), "type".into()],
        };
        assert!(matches!(twice.validate(), Err(Error::InvalidPolicy(_))));
    }

    #[test]
    fn invalid_policies_are_rejected() {
        let c = tshirt();
        for p in [
            ClassificationPolicy::Threshold { length_threshold: 0 },
            ClassificationPolicy::Budget {
                byte_budget: 10,
                item_bytes: 600,
            },
            ClassificationPolicy::Budget {
                byte_budget: 10,
                item_bytes: 0,
            },
        ] {
            assert!(matches!(classify_dimensions(&c, &p), Err(Error::InvalidPolicy(_))));
        }
    }

    #[test]
    fn selective_counts_and_degenerate_classifications() {
        let c = eval_hotel(365, 1.0);
        let i = inv(&c);
        let k = classify_dimensions(&c, &ClassificationPolicy::Threshold { length_threshold: 5 }).unwrap();
        let items = selective_instance_materialization(&c, &i, &k).unwrap();
        assert_eq!(items.len(), 8);
        assert!(items
            .iter()
            .all(|i| i.kind() == ItemKind::Partial && i.fixed(&c).len() == 3));

        let t = tshirt();
        let ti = inv(&t);
        let all_short = classify_dimensions(&t, &ClassificationPolicy::Threshold { length_threshold: 3 }).unwrap();
        let selective: HashSet<Vec<Option<u32>>> = selective_instance_materialization(&t, &ti, &all_short)
            .unwrap()
            .into_iter()
            .map(|i| i.fixed_indices().to_vec())
            .collect();
        let full: HashSet<Vec<Option<u32>>> = full_materialization(&t, &ti, 100)
            .unwrap()
            .map(|i| i.fixed_indices().to_vec())
            .collect();
        assert_eq!(selective, full);

        let all_long = DimensionClassification {
            short: vec![],
            long: vec!["color".into(), "size".into(), "cut".into()],
            policy: ClassificationPolicy::default(),
        };
        let items = selective_instance_materialization(&t, &ti, &all_long).unwrap();
        assert_eq!(items, abstraction(&t, &ti));
    }

    #[test]
    fn selective_rejects_foreign_classifications() {
        let t = tshirt();
        let bad = DimensionClassification {
            short: vec!["color".into()],
            long: vec!["size".into()],
            policy: ClassificationPolicy::default(),
        };
        assert!(selective_instance_materialization(&t, &inv(&t), &bad).is_err());
    }

    #[test]
    fn aggregated_availability_is_any_consistent() {
        let c = catalog(
            vec![categorical("a", &["x", "y"]), categorical("b", &["1", "2"])],
            flat_pricing(),
            1.0,
        );
        let mut i = inv(&c);
        for v in c.enumerate_variations(None).filter(|v| v.indices()[0] == 0) {
            i.book(&c, &v);
        }
        let items = type_level_materialization(&c, &i);
        let avail: Vec<bool> = items.iter().map(|i| i.available()).collect();
        assert_eq!(avail, vec![false, true, true, true]);
        assert!(abstraction(&c, &i)[0].available());
    }

    #[test]
    fn expected_counts_match_the_closed_forms() {
        let c = eval_hotel(365, 1.0);
        let o = PublishOptions::default();
        let got: Vec<u64> = Heuristic::ALL
            .iter()
            .map(|&h| expected_count(h, &c, &o).unwrap())
            .collect();
        assert_eq!(got, vec![87_600, 1, 1, 401, 8]);
    }

    #[test]
    fn policies_deserialize_from_config_json() {
        let p: ClassificationPolicy =
            serde_json::from_str(r#"{"mode": "budget", "byte_budget": 5000, "item_bytes": 600}"#).unwrap();
        assert_eq!(
            p,
            ClassificationPolicy::Budget {
                byte_budget: 5000,
                item_bytes: 600
            }
        );
        let p: PickerPolicy = serde_json::from_str(r#"{"mode": "seeded-random", "seed": 4}"#).unwrap();
        assert_eq!(p, PickerPolicy::SeededRandom { seed: 4 });
        let o: PublishOptions = serde_json::from_str(r#"{"hard_cap": 10}"#).unwrap();
        assert_eq!(o.hard_cap, 10);
        assert_eq!(o.picker, PickerPolicy::FirstLexicographic);
    }
}
