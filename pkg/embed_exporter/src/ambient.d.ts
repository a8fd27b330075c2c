// Optional dependency, resolved at runtime by ClipEncoder.load(); exports
// are used untyped so builds stay clean when the package is not installed.
declare module "@huggingface/transformers";
