//! Dataset generators for the four tasks, plus the catalogs and the
//! sibling lookup they draw from.

mod analogy;
mod catalog;
mod factcheck;
mod multihop;
mod objectcount;
mod siblings;

pub use analogy::{capital_explanation, city_explanation, gen_analogy};
pub use catalog::{Category, CategoryCatalog, Country, GeoCatalog, MIN_ENTITIES_PER_TYPE, TYPES_PER_CATEGORY};
pub use factcheck::{factcheck_explanation, gen_factcheck};
pub use multihop::{ingest_multihop, parse_multihop};
pub use objectcount::{gen_objectcount, membership_explanation, MAX_ITEMS, MIN_ITEMS};
pub use siblings::{sibling_query, SiblingClient, DEFAULT_SPARQL_ENDPOINT, SIBLING_LIMIT};

use crate::domain::KnowledgeTriplet;
use crate::text::{CAPITAL_OF, CITY_OF};

/// Ground facts of the unedited world: capitals, city locations, category
/// memberships and the true factcheck triplets.
pub fn world_facts(
    geo: &GeoCatalog,
    categories: &CategoryCatalog,
    triplets: &[KnowledgeTriplet],
) -> Vec<KnowledgeTriplet> {
    let geo_facts = geo.countries.iter().flat_map(|c| {
        [
            KnowledgeTriplet::new(&c.country, CAPITAL_OF, &c.capital),
            KnowledgeTriplet::new(&c.capital, CITY_OF, &c.country),
            KnowledgeTriplet::new(&c.noncapital_city, CITY_OF, &c.country),
        ]
    });
    let memberships = categories
        .facts()
        .map(|(e, r, t)| KnowledgeTriplet::new(e, r, t));
    geo_facts
        .chain(memberships)
        .chain(triplets.iter().cloned())
        .collect()
}

/// [`world_facts`] over the bundled catalogs.
pub fn bundled_world_facts() -> Vec<KnowledgeTriplet> {
    world_facts(
        &crate::bundled::geo_catalog(),
        &crate::bundled::category_catalog(),
        &crate::bundled::factcheck_triplets(),
    )
}
