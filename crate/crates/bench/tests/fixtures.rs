use streamld_bench::{logistic_stream, normal_set, saga_fixture};

#[test]
fn fixtures_are_consistent() {
    let stream = logistic_stream(50, 4);
    assert_eq!(stream.len(), 50);
    assert_eq!(stream.dim(), 5);
    let (chain, cache) = saga_fixture(&stream);
    assert_eq!(cache.len(), 50);
    assert_eq!(chain.epoch, 50);
    assert_eq!(normal_set(10, 3, 1).dim(), 3);
}
