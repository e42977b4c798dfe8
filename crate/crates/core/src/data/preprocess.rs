use super::Vocab;

/// Fixed sequence length fed to the language model.
pub const SEQ_LEN: usize = 10;
/// Per-client, per-domain cap on the token stream before chunking.
pub const TOKEN_CAP: usize = 1600;

/// Lowercased whitespace tokenization.
pub fn tokenize(sentence: &str) -> impl Iterator<Item = String> + '_ {
    sentence.split_whitespace().map(str::to_lowercase)
}

/// Wraps every sentence in BOS/EOS, maps out-of-vocabulary words to UNK,
/// concatenates, caps the stream at [`TOKEN_CAP`] tokens, and cuts it into
/// [`SEQ_LEN`]-token sequences, padding the last one with PAD.
pub fn preprocess_client<S: AsRef<str>>(raw_sentences: &[S], vocab: &Vocab) -> Vec<Vec<u32>> {
    let sp = vocab.specials();
    let mut stream: Vec<u32> = Vec::new();
    for sentence in raw_sentences {
        let words: Vec<u32> = tokenize(sentence.as_ref()).map(|w| vocab.id(&w)).collect();
        if words.is_empty() {
            continue;
        }
        stream.push(sp.bos);
        stream.extend(words);
        stream.push(sp.eos);
        if stream.len() >= TOKEN_CAP {
            break;
        }
    }
    stream.truncate(TOKEN_CAP);
    stream
        .chunks(SEQ_LEN)
        .map(|chunk| {
            let mut seq = chunk.to_vec();
            seq.resize(SEQ_LEN, sp.pad);
            seq
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocab {
        Vocab::from_words(vec!["hello".into(), "a".into()])
    }

    #[test]
    fn single_short_sentence() {
        let v = vocab();
        let sp = v.specials();
        let out = preprocess_client(&["Hello world"], &v);
        let mut expected = vec![sp.bos, v.id("hello"), sp.unk, sp.eos];
        expected.extend([sp.pad; 6]);
        assert_eq!(out, vec![expected]);
    }

    #[test]
    fn chunk_arithmetic() {
        let v = vocab();
        // 21 words + BOS + EOS = 23 tokens
        let sentence = vec!["a"; 21].join(" ");
        let out = preprocess_client(&[sentence], &v);
        assert_eq!(out.len(), 3);
        assert_eq!(out[2].iter().filter(|&&t| t == v.specials().pad).count(), 7);
    }

    #[test]
    fn token_cap() {
        let v = vocab();
        // 200 sentences of 8 words → 2,000 tokens
        let sentences: Vec<String> = (0..200).map(|_| vec!["a"; 8].join(" ")).collect();
        let out = preprocess_client(&sentences, &v);
        assert_eq!(out.len(), 160);
        assert!(out.iter().all(|s| s.len() == SEQ_LEN));
        assert!(preprocess_client::<&str>(&[], &v).is_empty());
    }

    proptest! {
        #[test]
        fn sequences_are_fixed_length_with_pad_suffix(
            sentences in proptest::collection::vec("[a-c ]{0,30}", 0..40)
        ) {
            let v = Vocab::from_words(vec!["a".into(), "b".into()]);
            let pad = v.specials().pad;
            let out = preprocess_client(&sentences, &v);
            let total: usize = out.len() * SEQ_LEN;
            prop_assert!(total <= TOKEN_CAP + SEQ_LEN - 1);
            for (i, seq) in out.iter().enumerate() {
                prop_assert_eq!(seq.len(), SEQ_LEN);
                if let Some(first_pad) = seq.iter().position(|&t| t == pad) {
                    prop_assert!(seq[first_pad..].iter().all(|&t| t == pad));
                    prop_assert_eq!(i, out.len() - 1);
                }
            }
        }
    }
}
