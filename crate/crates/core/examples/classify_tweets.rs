//! Trains the symptom classifier on a synthetic corpus and reports held-out
//! metrics, then corrects a daily count for collection downtime.

use epifuse::symptoms::*;

fn main() -> epifuse::Result<()> {
    let corpus = synthetic_corpus(300, 9);
    let (train, test) = corpus.split_at(corpus.len() * 4 / 5);
    let clf = SymptomClassifier::train(train, &ClassifierConfig::default())?;
    let m = clf.evaluate(test)?;
    println!("held-out macro F1 {:.3}, accuracy {:.3}", m.f1, m.accuracy);

    let labels: Vec<Label> = test.iter().map(|t| clf.classify(&t.text)).collect();
    let count = symptomatic_count(&labels);
    println!("symptomatic tweets {count}");
    for down in [0, 8, 48] {
        println!("  with {down} offline periods: {:.2}", correct_for_downtime(count as f64, down)?);
    }

    let lexicon = Lexicon::builtin();
    for (text, lang) in [("I have a fever and a cough", "en"), ("ho la febbre", "it"), ("lovely weather", "en")] {
        println!("{text:?} [{lang}] keyword match: {}", keyword_filter(text, lang, &lexicon));
    }
    Ok(())
}
