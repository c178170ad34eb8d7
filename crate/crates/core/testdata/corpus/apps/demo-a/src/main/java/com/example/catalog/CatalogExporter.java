package com.example.catalog;

import com.acme.xmlkit.Element;
import com.acme.xmlkit.ElementFactory;

public class CatalogExporter {
    private final ElementFactory factory = new ElementFactory();

    public String export(String tag) {
        String trimmed = tag.trim();
        return section(trimmed);
    }

    private String section(String name) {
        return element(name).toXml();
    }

    private Element element(String name) {
        return factory.createElement(name);
    }

    public String exportRaw(String tag) {
        return element(tag).toXml();
    }

    protected String exportLegacy(String tag) {
        return element(tag.toUpperCase()).toXml();
    }

    public Runnable later(final String tag) {
        return new Runnable() {
            @Override
            public void run() {
                element(tag);
            }
        };
    }

    public String exportAll(String[] tags) {
        StringBuilder sb = new StringBuilder();
        for (String t : tags) {
            sb.append(exportRaw(t));
        }
        return sb.toString();
    }
}
