package com.example.config;

import java.io.Reader;
import java.util.List;
import java.util.Map;

import com.acme.yamlite.YamlLoader;

public class ConfigService {
    private final YamlLoader loader = new YamlLoader();

    public Map<String, Object> read(String text, boolean strict) {
        if (strict) {
            return viaStrict(text);
        }
        return viaLenient(text);
    }

    private Map<String, Object> viaStrict(String text) {
        return loader.load(text);
    }

    Map<String, Object> viaLenient(String text) {
        String cleaned = text.replace('\t', ' ');
        return loader.load(cleaned);
    }

    public List<Object> readAll(Reader in) {
        return loader.loadAll(in);
    }
}
