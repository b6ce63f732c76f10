use proptest::prelude::*;

use softfacet::eval::wilcoxon::{wilcoxon_signed_rank, Alternative};
use softfacet::loglearn::{incremental_update, train, Session};
use softfacet::models::gaussian_range_likelihood;
use softfacet::rerank::{
    apply_filter_sequence, hard_filter, normalize_prior, remove_last_filter, rerank, ActionModel,
    IndicatorModel,
};
use softfacet::{
    BrandVocabulary, BrowseSession, Catalog, DirichletState, FacetFilter, FilterSpec, Item, Mode,
    ModelConfig, NigState, Result,
};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Per-(item, filter slot) likelihood table.
struct Table(Vec<Vec<f64>>);

impl ActionModel for Table {
    fn likelihood(&self, index: usize, _: &Item, filter: &FacetFilter) -> Result<f64> {
        let FacetFilter::Categorical(slot) = *filter else {
            unreachable!()
        };
        Ok(self.0[index][slot])
    }
}

fn catalog_of(prices: &[f64], brands: &[usize], n_brands: usize) -> Catalog {
    let vocab = BrandVocabulary::new((0..n_brands).map(|b| format!("brand{b}"))).unwrap();
    let items = prices
        .iter()
        .zip(brands)
        .enumerate()
        .map(|(i, (&price, &brand_index))| Item {
            id: format!("item{i:03}"),
            brand_index,
            price,
            title: String::new(),
        })
        .collect();
    Catalog::new(vocab, items).unwrap()
}

fn arb_catalog() -> impl Strategy<Value = (Catalog, Vec<f64>)> {
    (1usize..6, 1usize..60).prop_flat_map(|(n_brands, n)| {
        (
            prop::collection::vec(0u32..100, n),
            prop::collection::vec(0..n_brands, n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..10.0], n),
            Just(n_brands),
        )
            .prop_map(|(prices, brands, scores, n_brands)| {
                let prices: Vec<f64> = prices.into_iter().map(|p| p as f64 * 10.0).collect();
                (catalog_of(&prices, &brands, n_brands), scores)
            })
    })
}

fn arb_nig() -> impl Strategy<Value = NigState> {
    (-1e3f64..1e3, 0.01f64..50.0, 0.01f64..50.0, 0.01f64..1e4)
        .prop_map(|(m, k, a, b)| NigState::new(m, k, a, b).unwrap())
}

proptest! {
    #[test]
    fn dirichlet_conjugacy_and_conservation(
        alpha in prop::collection::vec(0.01f64..10.0, 1..12),
        raw_a in prop::collection::vec(0usize..1000, 0..300),
        raw_b in prop::collection::vec(0usize..1000, 0..300),
    ) {
        let k = alpha.len();
        let a: Vec<usize> = raw_a.iter().map(|x| x % k).collect();
        let b: Vec<usize> = raw_b.iter().map(|x| x % k).collect();
        let s = DirichletState::new(alpha).unwrap();
        let joined: Vec<usize> = a.iter().chain(&b).copied().collect();
        let batch = s.update(&joined).unwrap();
        prop_assert_eq!(&batch, &s.update(&a).unwrap().update(&b).unwrap());
        let mut reversed = joined.clone();
        reversed.reverse();
        prop_assert_eq!(&batch, &s.update(&reversed).unwrap());
        prop_assert!(close(batch.total(), s.total() + joined.len() as f64, 1e-12));
        let p = batch.estimate();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn nig_batch_equals_sequential(
        s in arb_nig(),
        a in prop::collection::vec(-2e3f64..2e3, 0..500),
        b in prop::collection::vec(-2e3f64..2e3, 0..500),
    ) {
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let batch = s.update(&joined).unwrap();
        let seq = s.update(&a).unwrap().update(&b).unwrap();
        prop_assert!(close(batch.mu, seq.mu, 1e-9) || (batch.mu - seq.mu).abs() < 1e-9);
        prop_assert!(close(batch.kappa, seq.kappa, 1e-9));
        prop_assert!(close(batch.alpha, seq.alpha, 1e-9));
        prop_assert!(close(batch.beta, seq.beta, 1e-9));
    }

    #[test]
    fn nig_matches_sum_of_squares_form(s in arb_nig(), xs in prop::collection::vec(-2e3f64..2e3, 0..200)) {
        let n = xs.len() as f64;
        let sum: f64 = xs.iter().sum();
        let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
        let kappa = s.kappa + n;
        let mu = (s.kappa * s.mu + sum) / kappa;
        let beta = s.beta + 0.5 * (sum_sq + s.kappa * s.mu * s.mu - kappa * mu * mu);
        let u = s.update(&xs).unwrap();
        prop_assert!(close(u.kappa, kappa, 1e-12));
        prop_assert!((u.mu - mu).abs() <= 1e-9 * (1.0 + mu.abs()));
        prop_assert!(close(u.alpha, s.alpha + n / 2.0, 1e-12));
        // the sum-of-squares form cancels badly, so compare on its own scale
        prop_assert!((u.beta - beta).abs() <= 1e-9 * (s.beta + sum_sq + s.kappa * s.mu * s.mu));
    }

    #[test]
    fn range_likelihood_is_additive(
        mu in -1e3f64..1e3,
        sigma in 1e-3f64..1e3,
        cuts in prop::collection::vec(-8.0f64..8.0, 3),
    ) {
        let mut c: Vec<f64> = cuts.iter().map(|z| mu + z * sigma).collect();
        c.sort_by(f64::total_cmp);
        let p = |lo, hi| gaussian_range_likelihood(mu, sigma, &FacetFilter::range(lo, hi).unwrap()).unwrap();
        prop_assert!((p(c[0], c[1]) + p(c[1], c[2]) - p(c[0], c[2])).abs() <= 1e-12);
        let total = p(f64::NEG_INFINITY, c[0]) + p(c[0], c[2]) + p(c[2], f64::INFINITY);
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn predictive_variance_exceeds_map(s in arb_nig()) {
        let (_, map_var) = s.map_estimate();
        let (_, scale_sq, _) = s.predictive_params();
        prop_assert!(scale_sq > map_var);
    }

    #[test]
    fn soft_rerank_keeps_everything_and_normalizes(
        (catalog, scores) in arb_catalog(),
        lik in prop::collection::vec(0.001f64..1.0, 60),
        scale in 1e-3f64..1e3,
    ) {
        let ids: Vec<(String, f64)> = catalog.items().iter().map(|it| it.id.clone()).zip(scores.iter().copied()).collect();
        prop_assume!(ids.iter().any(|(_, s)| *s > 0.0));
        let table = Table(lik.iter().map(|&l| vec![l]).collect());
        let prior = normalize_prior(&ids).unwrap();
        let (list, post) = rerank(&prior, &FacetFilter::Categorical(0), &table, &catalog, Mode::Soft).unwrap();
        prop_assert_eq!(list.len(), prior.len());
        prop_assert!((post.entries().iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(list.entries.windows(2).all(|w| w[0].score >= w[1].score));

        let scaled: Vec<(String, f64)> = ids.iter().map(|(id, s)| (id.clone(), s * scale)).collect();
        let prior2 = normalize_prior(&scaled).unwrap();
        let (list2, _) = rerank(&prior2, &FacetFilter::Categorical(0), &table, &catalog, Mode::Soft).unwrap();
        let a: Vec<&str> = list.item_ids().collect();
        let b: Vec<&str> = list2.item_ids().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn indicator_soft_reduces_to_hard(
        (catalog, scores) in arb_catalog(),
        lo in 0u32..100,
        width in 0u32..50,
        brand in 0usize..6,
        use_brand in any::<bool>(),
    ) {
        let ids: Vec<(String, f64)> = catalog.items().iter().map(|it| it.id.clone()).zip(scores.iter().copied()).collect();
        prop_assume!(ids.iter().any(|(_, s)| *s > 0.0));
        let prior = normalize_prior(&ids).unwrap();
        let filter = if use_brand {
            FacetFilter::Categorical(brand % catalog.vocab().len())
        } else {
            FacetFilter::range(lo as f64 * 10.0, (lo + width) as f64 * 10.0).unwrap()
        };
        let hard = hard_filter(&prior, &filter, &catalog).unwrap();
        match rerank(&prior, &filter, &IndicatorModel, &catalog, Mode::Soft) {
            Ok((soft, _)) => {
                let kept: Vec<&str> = soft.entries.iter().filter(|e| e.within_filter).map(|e| e.item_id.as_str()).collect();
                let hard_ids: Vec<&str> = hard.item_ids().collect();
                prop_assert_eq!(kept, hard_ids);
            }
            Err(_) => prop_assert!(hard.entries.iter().all(|e| e.score == 0.0)),
        }
    }

    #[test]
    fn chaining_equals_product_update(
        (catalog, scores) in arb_catalog(),
        lik in prop::collection::vec(prop::collection::vec(0.001f64..1.0, 4), 60),
        slots in prop::collection::vec(0usize..4, 1..5),
    ) {
        let ids: Vec<(String, f64)> = catalog.items().iter().map(|it| it.id.clone()).zip(scores.iter().copied()).collect();
        prop_assume!(ids.iter().any(|(_, s)| *s > 0.0));
        let table = Table(lik);
        let prior = normalize_prior(&ids).unwrap();
        let session = BrowseSession::new("s", "q", prior.clone());
        let filters: Vec<FacetFilter> = slots.iter().map(|&s| FacetFilter::Categorical(s)).collect();
        let chained = apply_filter_sequence(&session, &filters, &table, &catalog, Mode::Soft).unwrap();

        let weights: Vec<(String, f64)> = prior
            .entries()
            .iter()
            .map(|(id, p)| {
                let i = catalog.index_of(id).unwrap();
                (id.clone(), p * slots.iter().map(|&s| table.0[i][s]).product::<f64>())
            })
            .collect();
        let z: f64 = weights.iter().map(|w| w.1).sum();
        for (id, w) in &weights {
            let got = chained.current_propensity.get(id).unwrap();
            prop_assert!((got - w / z).abs() <= 1e-12);
        }

        let undone = remove_last_filter(&chained, &table, &catalog).unwrap();
        let expected = apply_filter_sequence(&session, &filters[..filters.len() - 1], &table, &catalog, Mode::Soft).unwrap();
        prop_assert_eq!(undone, expected);
    }

    #[test]
    fn batch_training_equals_incremental(
        log in prop::collection::vec((0usize..3, 0usize..8, prop::collection::vec((any::<bool>(), 0usize..4, 0u32..40, 1u32..10), 0..4)), 0..40),
        cut in 0usize..40,
    ) {
        let prices: Vec<f64> = (0..8).map(|i| 20.0 + 35.0 * i as f64).collect();
        let brands: Vec<usize> = (0..8).map(|i| i % 4).collect();
        let catalog = catalog_of(&prices, &brands, 4);
        let sessions: Vec<Session> = log
            .iter()
            .enumerate()
            .map(|(n, (q, item, acts))| {
                let actions = acts
                    .iter()
                    .map(|&(is_brand, b, lo, w)| {
                        if is_brand {
                            FilterSpec::Brand { value: format!("brand{b}") }
                        } else {
                            FilterSpec::Price { lo: Some(lo as f64 * 10.0), hi: Some((lo + w) as f64 * 10.0) }
                        }
                    })
                    .collect();
                let purchase = (*item < 7).then(|| format!("item{item:03}"));
                Session::new(format!("s{n}"), format!("q{q}"), actions, purchase)
            })
            .collect();
        let cut = cut.min(sessions.len());
        let config = ModelConfig::default();
        let batch = train(&catalog, &sessions, &config).unwrap();
        let first = train(&catalog, &sessions[..cut], &config).unwrap();
        let inc = incremental_update(&first, &catalog, &sessions[cut..]).unwrap();
        prop_assert_eq!(batch.metadata.session_count, inc.metadata.session_count);
        prop_assert_eq!(batch.states.len(), inc.states.len());
        for (key, b) in &batch.states {
            let i = &inc.states[key];
            prop_assert_eq!(b.dirichlet.alpha(), i.dirichlet.alpha());
            prop_assert!(close(b.nig.mu, i.nig.mu, 1e-9));
            prop_assert!(close(b.nig.kappa, i.nig.kappa, 1e-9));
            prop_assert!(close(b.nig.alpha, i.nig.alpha, 1e-9));
            prop_assert!(close(b.nig.beta, i.nig.beta, 1e-9));
        }
        prop_assert_eq!(&batch, &train(&catalog, &sessions, &config).unwrap());
    }

    #[test]
    fn wilcoxon_antisymmetry(pairs in prop::collection::vec((0u32..30, 0u32..30), 1..60)) {
        let pairs: Vec<(f64, f64)> = pairs.iter().map(|&(s, h)| (s as f64, h as f64)).collect();
        prop_assume!(pairs.iter().any(|(s, h)| s != h));
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(s, h)| (h, s)).collect();
        let r = wilcoxon_signed_rank(&pairs, Alternative::SoftLess).unwrap();
        let m = wilcoxon_signed_rank(&swapped, Alternative::SoftGreater).unwrap();
        let n = r.n as f64;
        prop_assert!((r.w_plus + r.w_minus - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert_eq!(r.w_plus, m.w_minus);
        prop_assert!((r.p_value - m.p_value).abs() < 1e-12);
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }
}
